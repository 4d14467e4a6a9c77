"""Lesson scheduling: phase in the full task objective by sampling proportion.

Lesson 1 trains pure approach behavior: the per-particle task reward and the
completion bonus are zeroed and episodes never terminate on completion. The
full task is sampled with probability p, which steps up through transitional
lessons as training progresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import CurriculumConfig


@dataclass(frozen=True)
class LessonConfig:
    full_task: bool = True


def lesson_probability(cfg: CurriculumConfig, global_step: int) -> float:
    """Probability of the full-task lesson at this point in training."""
    p = 0.0
    for threshold, prob in cfg.lessons:
        if global_step >= threshold:
            p = prob
        else:
            break
    return p


def sample_lesson(cfg: CurriculumConfig, global_step: int,
                  rng: np.random.Generator) -> LessonConfig:
    if not cfg.enabled:
        return LessonConfig(full_task=True)
    p = lesson_probability(cfg, global_step)
    return LessonConfig(full_task=bool(rng.uniform() < p))
