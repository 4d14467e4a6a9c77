from .base import LifecycleError, Observation, SurgicalFluidEnv, make_env
from .curriculum import LessonConfig, lesson_probability, sample_lesson
from .rewards import StateSnapshot, check_completion, compute_reward
from .vec import VectorEnv

__all__ = [
    "LessonConfig",
    "LifecycleError",
    "Observation",
    "StateSnapshot",
    "SurgicalFluidEnv",
    "VectorEnv",
    "check_completion",
    "compute_reward",
    "lesson_probability",
    "make_env",
    "sample_lesson",
]
