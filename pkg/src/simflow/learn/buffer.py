"""On-policy rollout storage with generalized advantage estimation.

Time-major layout (T, N, ...) so the GAE recursion can run per environment
chain. The training reward channel (env reward plus any imitation bonus) feeds
GAE; the raw env reward stream is kept alongside for bookkeeping.
"""

from __future__ import annotations

import numpy as np


class RolloutBuffer:
    def __init__(self, n_steps: int, n_envs: int, obs_dim: int, act_dim: int,
                 image_shape=None):
        self.n_steps = n_steps
        self.n_envs = n_envs
        self.obs = np.zeros((n_steps, n_envs, obs_dim), dtype=np.float32)
        self.images = (
            np.zeros((n_steps, n_envs, *image_shape), dtype=np.float32)
            if image_shape is not None else None
        )
        self.actions = np.zeros((n_steps, n_envs, act_dim), dtype=np.float32)
        self.log_probs = np.zeros((n_steps, n_envs), dtype=np.float32)
        self.rewards = np.zeros((n_steps, n_envs), dtype=np.float32)  # training channel
        self.env_rewards = np.zeros((n_steps, n_envs), dtype=np.float32)
        self.values = np.zeros((n_steps, n_envs), dtype=np.float32)
        self.dones = np.zeros((n_steps, n_envs), dtype=bool)
        self.advantages = np.zeros((n_steps, n_envs), dtype=np.float32)
        self.returns = np.zeros((n_steps, n_envs), dtype=np.float32)
        self.pos = 0

    @property
    def size(self) -> int:
        return self.pos * self.n_envs

    @property
    def full(self) -> bool:
        return self.pos >= self.n_steps

    def add(self, obs, action, log_prob, reward, env_reward, value, done, image=None):
        t = self.pos
        self.obs[t] = obs
        if self.images is not None:
            self.images[t] = image
        self.actions[t] = action
        self.log_probs[t] = log_prob
        self.rewards[t] = reward
        self.env_rewards[t] = env_reward
        self.values[t] = value
        self.dones[t] = done
        self.pos += 1

    def reset(self):
        self.pos = 0

    def flat(self, arr: np.ndarray) -> np.ndarray:
        return arr[: self.pos].reshape(self.pos * self.n_envs, *arr.shape[2:])

    def minibatch_indices(self, batch_size: int, rng: np.random.Generator):
        n = self.size
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            if len(sel):
                yield sel


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float,
                last_values: np.ndarray) -> RolloutBuffer:
    """Standard GAE recursion over the training-reward channel.

    ``done`` marks true episode boundaries (no bootstrap across them); the
    final partial episode bootstraps from ``last_values``.
    """
    T = buffer.pos
    adv = np.zeros((T, buffer.n_envs), dtype=np.float64)
    next_adv = np.zeros(buffer.n_envs, dtype=np.float64)
    next_values = np.asarray(last_values, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        not_done = ~buffer.dones[t]
        delta = (
            buffer.rewards[t].astype(np.float64)
            + gamma * next_values * not_done
            - buffer.values[t].astype(np.float64)
        )
        next_adv = delta + gamma * lam * not_done * next_adv
        adv[t] = next_adv
        next_values = buffer.values[t].astype(np.float64)
    buffer.advantages[:T] = adv.astype(np.float32)
    buffer.returns[:T] = buffer.advantages[:T] + buffer.values[:T]
    return buffer
