"""Deterministic policy evaluation: mean return, completion rate, remaining
particles, episode length."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .nets import ActionDist, PolicyNet, obs_batch_to_tensors


@dataclass
class EvalStats:
    episodes: int
    mean_return: float
    std_return: float
    completion_rate: float
    mean_remaining: float
    mean_length: float

    def row(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_return": self.mean_return,
            "std_return": self.std_return,
            "completion_rate": self.completion_rate,
            "mean_remaining": self.mean_remaining,
            "mean_length": self.mean_length,
        }


def policy_fn_from_net(net: PolicyNet, task: str, deterministic: bool = True):
    """Wrap a network as a ``policy(env, obs) -> action`` callable
    (distribution mean / argmax toggle when deterministic)."""

    def fn(env, obs):
        with torch.no_grad():
            vec, img = obs_batch_to_tensors([obs], task)
            mean, log_std, logit, _ = net(vec, img)
            dist = ActionDist(mean, log_std, logit)
            action = dist.deterministic() if deterministic else dist.sample()
        return action[0].numpy().astype(np.float64)

    return fn


def remaining_particles(env, info: dict) -> float:
    if env.task == "irrigation":
        return float((1.0 - info["affected_fraction"]) * len(env.blood_ids))
    return float(info["live_count"])


def evaluate_policy(policy, env_factory, n_episodes: int, seed_base: int) -> EvalStats:
    """``policy`` is a callable (env, obs) -> action; fresh env per episode."""
    returns, lengths, completions, remaining = [], [], [], []
    for ep in range(n_episodes):
        env = env_factory()
        obs = env.reset(seed_base + ep)
        done = False
        total = 0.0
        steps = 0
        info: dict = {}
        while not done:
            obs, r, done, info = env.step(policy(env, obs))
            total += r
            steps += 1
        returns.append(total)
        lengths.append(steps)
        completions.append(bool(info["completion"]))
        remaining.append(remaining_particles(env, info))
    returns = np.asarray(returns)
    return EvalStats(
        episodes=n_episodes,
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        completion_rate=float(np.mean(completions)),
        mean_remaining=float(np.mean(remaining)),
        mean_length=float(np.mean(lengths)),
    )
