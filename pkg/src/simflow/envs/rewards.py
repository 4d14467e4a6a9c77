"""Reward decomposition for both tasks.

The scalar reward is the dot product of the reported feature vector and its
weights, exactly; tests assert the identity on every step. Conventions:
distances in meters on the xy-plane, orientation in degrees of tool tilt from
vertical, counts as raw particle counts, indicators in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..config import RewardConfig
from .curriculum import LessonConfig


@dataclass
class StateSnapshot:
    """Per-decision-step view of everything the reward needs."""

    affected_total: int  # irrigation: original blood particles ever affected
    removed_total: int  # suction: particles removed so far
    target_distance: float | None  # horizontal tip->target distance
    tilt_deg: float
    contact: bool
    completion: bool
    live_count: int


def compute_reward(
    task: str,
    prev: StateSnapshot,
    new: StateSnapshot,
    toggle_on: bool,
    cfg: RewardConfig,
    lesson: LessonConfig = LessonConfig(),
) -> tuple[float, dict[str, float], dict[str, float]]:
    """Returns (reward, features, weights); reward == sum(features * weights)."""
    if new.target_distance is not None and prev.target_distance is not None:
        approach = prev.target_distance - new.target_distance
    else:
        approach = 0.0

    if task == "irrigation":
        near = (
            new.target_distance is not None
            and new.target_distance < cfg.proximity_threshold
        )
        match = (near and toggle_on) or (not near and not toggle_on)
        features = {
            "affected": float(new.affected_total - prev.affected_total),
            "completion": 1.0 if (new.completion and not prev.completion) else 0.0,
            "approach": approach,
            "toggle_match": 1.0 if match else 0.0,
            "toggle_mismatch": 0.0 if match else 1.0,
            "orientation": new.tilt_deg,
            "contact": 1.0 if new.contact else 0.0,
        }
        weights = {
            "affected": cfg.irrigation_affected if lesson.full_task else 0.0,
            "completion": cfg.irrigation_completion if lesson.full_task else 0.0,
            "approach": cfg.irrigation_approach,
            "toggle_match": cfg.irrigation_toggle_match,
            "toggle_mismatch": cfg.irrigation_toggle_mismatch,
            "orientation": cfg.irrigation_orientation,
            "contact": cfg.irrigation_contact,
        }
    elif task == "suction":
        features = {
            "removed": float(new.removed_total - prev.removed_total),
            "completion": 1.0 if (new.completion and not prev.completion) else 0.0,
            "approach": approach,
            "orientation": new.tilt_deg,
            "contact": 1.0 if new.contact else 0.0,
        }
        weights = {
            "removed": cfg.suction_removed,
            "completion": cfg.suction_completion,
            "approach": cfg.suction_approach,
            "orientation": cfg.suction_orientation,
            "contact": cfg.suction_contact,
        }
    else:
        raise ValueError(f"unknown task {task!r}")

    reward = sum(features[k] * weights[k] for k in features)
    return reward, features, weights


def check_completion(task: str, affected_fraction: float, live_count: int,
                     phi_complete: float, k_remaining: int) -> bool:
    if task == "irrigation":
        return affected_fraction >= phi_complete
    return live_count <= k_remaining
