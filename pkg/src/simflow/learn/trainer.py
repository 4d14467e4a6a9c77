"""PPO training loop with optional BC auxiliary steps and GAIL reward
augmentation, curriculum-aware episode sampling, CSV metrics, checkpoints."""

from __future__ import annotations

import csv
import os
from collections import deque

import numpy as np
import torch

from ..config import RunConfig
from ..envs import VectorEnv, make_env, sample_lesson
from ..experts.demos import Demonstration
from .buffer import RolloutBuffer, compute_gae
from .evaluate import remaining_particles
from .nets import (
    ActionDist,
    build_discriminator,
    build_policy,
    obs_batch_to_tensors,
)
from .updates import bc_update, gail_reward, gail_update, ppo_update

CHECKPOINT_VERSION = 1


def save_checkpoint(path, policy, cfg: RunConfig, task: str, disc=None, meta=None):
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "task": task,
            "digest": cfg.digest(),
            "obs_mode": cfg.env.obs_mode,
            "policy": policy.state_dict(),
            "discriminator": None if disc is None else disc.state_dict(),
            "meta": meta or {},
        },
        path,
    )


def load_checkpoint(path, cfg: RunConfig, allow_digest_mismatch: bool = False):
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
    if blob["digest"] != cfg.digest() and not allow_digest_mismatch:
        raise ValueError(
            f"checkpoint digest {blob['digest']} != config digest {cfg.digest()}; "
            "pass --allow-digest-mismatch to override"
        )
    policy = build_policy(cfg, blob["task"])
    policy.load_state_dict(blob["policy"])
    disc = None
    if blob.get("discriminator") is not None:
        disc = build_discriminator(cfg, blob["task"])
        disc.load_state_dict(blob["discriminator"])
    return policy, disc, blob


class Trainer:
    def __init__(self, cfg: RunConfig, use_bc: bool = False, use_gail: bool = False,
                 demos: list[Demonstration] | None = None, metrics_path=None,
                 checkpoint_dir=None, log=print):
        self.cfg = cfg
        self.task = cfg.task
        self.train_cfg = cfg.train
        self.use_bc = use_bc
        self.use_gail = use_gail
        self.log = log
        torch.manual_seed(cfg.train.seed)
        torch.set_num_threads(max(1, os.cpu_count() // 2 if os.cpu_count() else 1))
        self.np_rng = np.random.default_rng(cfg.train.seed)
        self.lesson_rng = np.random.default_rng(cfg.train.seed + 7)
        self.sample_gen = torch.Generator().manual_seed(cfg.train.seed + 13)

        self.vec = VectorEnv(
            lambda: make_env(cfg), cfg.train.n_envs, base_seed=cfg.seed,
            lesson_fn=lambda step: sample_lesson(cfg.curriculum, step, self.lesson_rng),
        )
        self.policy = build_policy(cfg)
        self.optimizer = torch.optim.Adam(self.policy.parameters(),
                                          lr=cfg.train.learning_rate)
        self.bc_optimizer = None
        self.bc_steps_done = 0
        self.demo_obs = self.demo_actions = None
        if use_bc or use_gail:
            if not demos:
                raise ValueError("BC/GAIL requested but no demonstrations provided")
            self._load_demos(demos)
        if use_bc:
            self.bc_optimizer = torch.optim.Adam(self.policy.parameters(),
                                                 lr=cfg.train.learning_rate)
        self.disc = self.disc_optimizer = None
        if use_gail:
            self.disc = build_discriminator(cfg)
            self.disc_optimizer = torch.optim.Adam(self.disc.parameters(),
                                                   lr=cfg.train.learning_rate)
        self.metrics_path = metrics_path
        self.checkpoint_dir = checkpoint_dir
        self._recent = deque(maxlen=50)  # (return, length, completion, remaining)

    def _load_demos(self, demos: list[Demonstration]):
        vec_dim = 13 * self.cfg.env.frame_stack if self.cfg.env.obs_mode == "vector" \
            else 6 * self.cfg.env.frame_stack
        act_dim = 6 if self.task == "irrigation" else 5
        for d in demos:
            if d.obs_mode != self.cfg.env.obs_mode:
                raise ValueError(
                    f"demo obs mode {d.obs_mode!r} != config {self.cfg.env.obs_mode!r}"
                )
            if d.observations.shape[1] != vec_dim or d.actions.shape[1] != act_dim:
                raise ValueError("demo dimensions do not match the configured env")
        self.demo_obs = np.concatenate([d.observations for d in demos])
        self.demo_actions = np.concatenate([d.actions for d in demos])

    # --------------------------------------------------------------- loop

    def train(self, total_steps: int | None = None) -> dict:
        cfg = self.train_cfg
        from .nets import obs_dims

        total = total_steps or cfg.total_steps
        n_envs = cfg.n_envs
        steps_per_rollout = max(1, cfg.rollout_buffer_size // n_envs)
        obs_dim, image_shape, action_dim, has_toggle = obs_dims(self.cfg, self.task)
        act_dim = action_dim + (1 if has_toggle else 0)
        buffer = RolloutBuffer(steps_per_rollout, n_envs, obs_dim, act_dim, image_shape)

        writer = None
        metrics_file = None
        if self.metrics_path:
            metrics_file = open(self.metrics_path, "w", newline="")
            writer = csv.writer(metrics_file)
            writer.writerow([
                "step", "mean_return", "completion_rate", "mean_remaining",
                "mean_length", "policy_loss", "value_loss", "entropy",
                "clip_fraction", "approx_kl", "bc_loss", "gail_accuracy",
            ])

        obs_list = self.vec.reset_all()
        steps_done = 0
        rollout_idx = 0
        try:
            while steps_done < total:
                progress = steps_done / total
                lr_now = cfg.learning_rate * (1.0 - progress)
                clip_now = cfg.clip_epsilon * (1.0 - progress)
                for group in self.optimizer.param_groups:
                    group["lr"] = max(lr_now, 1e-6)

                buffer.reset()
                obs_list = self._collect(buffer, obs_list,
                                         min(steps_per_rollout,
                                             (total - steps_done + n_envs - 1) // n_envs))
                steps_done += buffer.size

                with torch.no_grad():
                    vec, img = obs_batch_to_tensors(obs_list, self.task)
                    *_, last_values = self.policy(vec, img)
                compute_gae(buffer, cfg.gamma, cfg.gae_lambda, last_values.numpy())
                stats = ppo_update(self.policy, self.optimizer, buffer, cfg,
                                   max(clip_now, 0.02), self.np_rng)

                bc_loss = float("nan")
                if self.use_bc and self.bc_steps_done < cfg.bc_steps:
                    bc_loss = self._bc_round(total, steps_per_rollout * n_envs)
                gail_acc = float("nan")
                if self.use_gail:
                    gail_acc = self._gail_round(buffer)

                rollout_idx += 1
                row = self._metrics_row(steps_done, stats, bc_loss, gail_acc)
                if writer:
                    writer.writerow(row)
                    metrics_file.flush()
                self.log(
                    f"[{steps_done}/{total}] return={row[1]:.3f} "
                    f"completion={row[2]:.2f} remaining={row[3]:.1f} "
                    f"policy_loss={stats['policy_loss']:.4f} kl={stats['approx_kl']:.4f}"
                )
                if self.checkpoint_dir:
                    path = os.path.join(self.checkpoint_dir, "latest.pt")
                    save_checkpoint(path, self.policy, self.cfg, self.task, self.disc,
                                    meta={"steps": steps_done})
        finally:
            if metrics_file:
                metrics_file.close()
        return {
            "steps": steps_done,
            "mean_return": self._mean_recent(0),
            "completion_rate": self._mean_recent(2),
            "mean_remaining": self._mean_recent(3),
        }

    def _collect(self, buffer: RolloutBuffer, obs_list, n_steps: int):
        for _ in range(n_steps):
            with torch.no_grad():
                vec, img = obs_batch_to_tensors(obs_list, self.task)
                mean, log_std, logit, values = self.policy(vec, img)
                dist = ActionDist(mean, log_std, logit)
                actions = dist.sample(self.sample_gen)
                log_probs = dist.log_prob(actions)
            actions_np = actions.numpy().astype(np.float64)
            next_obs, rewards, dones, infos = self.vec.step(actions_np)
            train_rewards = rewards.astype(np.float32)
            if self.disc is not None:
                aux = gail_reward(self.disc, vec.numpy(),
                                  self.train_cfg.gail_reward_strength,
                                  None if img is None else img.numpy())
                train_rewards = train_rewards + aux.astype(np.float32)
            for ret, length, info in self.vec.finished_episodes:
                self._recent.append((
                    ret, length, float(info["completion"]),
                    float(info["live_count"]) if self.task == "suction"
                    else (1.0 - info["affected_fraction"]) * info["blood_total"],
                ))
            self.vec.finished_episodes.clear()
            buffer.add(
                vec.numpy(), actions.numpy(), log_probs.numpy(),
                train_rewards, rewards.astype(np.float32),
                values.numpy(), dones,
                None if img is None else img.numpy(),
            )
            obs_list = next_obs
            if buffer.full:
                break
        return obs_list

    def _bc_round(self, total_steps: int, rollout_size: int) -> float:
        cfg = self.train_cfg
        rounds = max(1, total_steps // rollout_size)
        per_round = max(1, int(np.ceil(cfg.bc_steps / rounds)))
        last = float("nan")
        for _ in range(per_round):
            if self.bc_steps_done >= cfg.bc_steps:
                break
            strength = cfg.bc_strength * (1.0 - self.bc_steps_done / cfg.bc_steps)
            sel = self.np_rng.integers(0, len(self.demo_obs),
                                       size=min(cfg.bc_batch_size, len(self.demo_obs)))
            last = bc_update(self.policy, self.bc_optimizer,
                             self.demo_obs[sel], self.demo_actions[sel], strength)
            self.bc_steps_done += 1
        return last

    def _gail_round(self, buffer: RolloutBuffer, updates: int = 4) -> float:
        cfg = self.train_cfg
        agent_obs = buffer.flat(buffer.obs)
        acc = float("nan")
        for _ in range(updates):
            e_sel = self.np_rng.integers(0, len(self.demo_obs), size=cfg.gail_batch_size)
            a_sel = self.np_rng.integers(0, len(agent_obs), size=cfg.gail_batch_size)
            out = gail_update(self.disc, self.disc_optimizer,
                              self.demo_obs[e_sel], agent_obs[a_sel])
            acc = out["accuracy"]
        return acc

    def _mean_recent(self, idx: int) -> float:
        if not self._recent:
            return float("nan")
        return float(np.mean([r[idx] for r in self._recent]))

    def _metrics_row(self, step, stats, bc_loss, gail_acc):
        return [
            step,
            self._mean_recent(0),
            self._mean_recent(2),
            self._mean_recent(3),
            self._mean_recent(1),
            stats["policy_loss"],
            stats["value_loss"],
            stats["entropy"],
            stats["clip_fraction"],
            stats["approx_kl"],
            bc_loss,
            gail_acc,
        ]
