from .clustering import Cluster, ClusterSet, cluster_particles
from .demos import (
    DemoCompatibilityError,
    DemoParseError,
    Demonstration,
    RecordingError,
    ReplayReport,
    read_demo,
    record_demo,
    replay_demo,
    write_demo,
)
from .scripted import (
    scripted_irrigation_action,
    scripted_policy,
    scripted_suction_action,
)

__all__ = [
    "DemoCompatibilityError",
    "DemoParseError",
    "RecordingError",
    "ReplayReport",
    "scripted_policy",
    "Cluster",
    "ClusterSet",
    "cluster_particles",
    "Demonstration",
    "read_demo",
    "record_demo",
    "replay_demo",
    "write_demo",
    "scripted_irrigation_action",
    "scripted_suction_action",
]
