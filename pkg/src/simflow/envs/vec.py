"""Vector-of-environments wrapper: steps N instances with auto-reset.

Instances are stepped sequentially in index order, which satisfies the
determinism contract (fixed seeds -> identical runs) by construction. Each
env draws episode seeds from its own deterministic counter stream, and lesson
configs come from a caller-provided sampler keyed on the global step count.
"""

from __future__ import annotations

import numpy as np

from .base import Observation, SurgicalFluidEnv
from .curriculum import LessonConfig


class VectorEnv:
    def __init__(self, factory, n_envs: int, base_seed: int, lesson_fn=None):
        self.envs: list[SurgicalFluidEnv] = [factory() for _ in range(n_envs)]
        self.n_envs = n_envs
        self.base_seed = base_seed
        self.lesson_fn = lesson_fn or (lambda global_step: LessonConfig())
        self._episode_counter = [0] * n_envs
        self.global_step = 0  # decision steps summed over envs
        self.episode_returns = np.zeros(n_envs)
        self.episode_lengths = np.zeros(n_envs, dtype=np.int64)
        self.finished_episodes: list[tuple[float, int, dict]] = []

    def _seed_for(self, i: int) -> int:
        return self.base_seed + 100_003 * self._episode_counter[i] + i

    def reset_all(self) -> list[Observation]:
        obs = []
        for i, env in enumerate(self.envs):
            obs.append(env.reset(self._seed_for(i), self.lesson_fn(self.global_step)))
        return obs

    def step(self, actions) -> tuple[list[Observation], np.ndarray, np.ndarray, list[dict]]:
        """Steps every env; finished envs are reset and return the fresh obs."""
        obs_out = []
        rewards = np.zeros(self.n_envs)
        dones = np.zeros(self.n_envs, dtype=bool)
        infos = []
        for i, env in enumerate(self.envs):
            obs, r, done, info = env.step(actions[i])
            self.global_step += 1
            self.episode_returns[i] += r
            self.episode_lengths[i] += 1
            if done:
                self.finished_episodes.append(
                    (float(self.episode_returns[i]), int(self.episode_lengths[i]), info)
                )
                self.episode_returns[i] = 0.0
                self.episode_lengths[i] = 0
                self._episode_counter[i] += 1
                obs = env.reset(self._seed_for(i), self.lesson_fn(self.global_step))
            obs_out.append(obs)
            rewards[i] = r
            dones[i] = done
            infos.append(info)
        return obs_out, rewards, dones, infos
