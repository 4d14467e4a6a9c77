"""Demonstration recording, file format, and replay verification.

File layout (little-endian):
    magic "SFDM" | u32 version | u32 header_len | header JSON (utf-8)
    then one length-prefixed record per step:
    u32 record_len | obs float32[obs_dim] | action float32[act_dim]
                   | reward float32 | done u8
Vector observations and actions only; images are regenerable by replaying the
seed. Rewards are stored (and compared on replay) at float32 precision.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SFDM"
VERSION = 1


class DemoError(RuntimeError):
    pass


class DemoParseError(DemoError):
    pass


class DemoCompatibilityError(DemoError):
    pass


class RecordingError(DemoError):
    pass


@dataclass
class Demonstration:
    task: str
    config_digest: str
    seed: int
    obs_mode: str
    backend: str
    max_steps: int  # physics-step cap the episode ran under
    observations: np.ndarray  # (n, obs_dim) float32
    actions: np.ndarray  # (n, act_dim) float32
    rewards: np.ndarray  # (n,) float32
    dones: np.ndarray  # (n,) bool
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.observations)
        if not (len(self.actions) == len(self.rewards) == len(self.dones) == n):
            raise ValueError("ragged demonstration arrays")
        if n and (self.dones.sum() != 1 or not self.dones[-1]):
            raise ValueError("demonstration must end with exactly one terminal step")

    def __len__(self) -> int:
        return len(self.observations)

    def header(self) -> dict:
        return {
            "version": VERSION,
            "task": self.task,
            "digest": self.config_digest,
            "seed": self.seed,
            "obs_mode": self.obs_mode,
            "backend": self.backend,
            "max_steps": self.max_steps,
            "steps": int(len(self.observations)),
            "obs_dim": int(self.observations.shape[1]) if len(self) else 0,
            "act_dim": int(self.actions.shape[1]) if len(self) else 0,
            **self.extra,
        }


def record_demo(env, policy, seed: int) -> Demonstration:
    """Roll ``policy(env, obs)`` to termination on a freshly reset env."""
    from ..fluids import BACKEND

    obs = env.reset(seed)
    observations, actions, rewards, dones = [], [], [], []
    while True:
        action = np.asarray(policy(env, obs), dtype=np.float64)
        if not np.isfinite(action).all():
            raise RecordingError(
                f"policy emitted non-finite action at step {len(actions)}: {action}"
            )
        # quantize to the stored precision BEFORE stepping, so replaying the
        # file drives the env with bit-identical actions
        action_f32 = action.astype(np.float32)
        next_obs, reward, done, _ = env.step(action_f32.astype(np.float64))
        observations.append(obs.vector.astype(np.float32))
        actions.append(action_f32)
        rewards.append(np.float32(reward))
        dones.append(done)
        obs = next_obs
        if done:
            break
    return Demonstration(
        task=env.task,
        config_digest=env.cfg.digest(),
        seed=seed,
        obs_mode=env.env_cfg.obs_mode,
        backend=BACKEND,
        max_steps=env.max_steps,
        observations=np.stack(observations),
        actions=np.stack(actions),
        rewards=np.array(rewards, dtype=np.float32),
        dones=np.array(dones, dtype=bool),
    )


def write_demo(demo: Demonstration, path) -> None:
    header = json.dumps(demo.header(), sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        n = len(demo)
        for i in range(n):
            obs = demo.observations[i].astype("<f4").tobytes()
            act = demo.actions[i].astype("<f4").tobytes()
            rec = obs + act + struct.pack("<f", float(demo.rewards[i])) + (
                b"\x01" if demo.dones[i] else b"\x00"
            )
            f.write(struct.pack("<I", len(rec)))
            f.write(rec)


def read_demo(path, expect_digest: str | None = None) -> Demonstration:
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(blob):
            raise DemoParseError(f"truncated demo file: {what} at byte {off}")
        out = blob[off:off + n]
        off += n
        return out

    if take(4, "magic") != MAGIC:
        raise DemoParseError("not a demo file (bad magic) at byte 0")
    version, header_len = struct.unpack("<II", take(8, "version/header length"))
    if version != VERSION:
        raise DemoParseError(f"unsupported demo version {version}")
    try:
        header = json.loads(take(header_len, "header").decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DemoParseError(f"bad header JSON: {exc}") from None

    if expect_digest is not None and header["digest"] != expect_digest:
        raise DemoCompatibilityError(
            f"demo config digest {header['digest']} does not match expected "
            f"{expect_digest}; the demo was recorded under a different env/reward config"
        )

    steps = header["steps"]
    obs_dim = header["obs_dim"]
    act_dim = header["act_dim"]
    rec_len = 4 * obs_dim + 4 * act_dim + 4 + 1
    observations = np.empty((steps, obs_dim), dtype=np.float32)
    actions = np.empty((steps, act_dim), dtype=np.float32)
    rewards = np.empty(steps, dtype=np.float32)
    dones = np.empty(steps, dtype=bool)
    for i in range(steps):
        (length,) = struct.unpack("<I", take(4, f"record {i} length"))
        if length != rec_len:
            raise DemoParseError(
                f"record {i} length {length} != expected {rec_len} at byte {off - 4}"
            )
        rec = take(length, f"record {i}")
        observations[i] = np.frombuffer(rec, dtype="<f4", count=obs_dim)
        actions[i] = np.frombuffer(rec, dtype="<f4", count=act_dim, offset=4 * obs_dim)
        (rewards[i],) = struct.unpack_from("<f", rec, 4 * (obs_dim + act_dim))
        dones[i] = rec[-1] == 1
    if off != len(blob):
        raise DemoParseError(f"trailing garbage at byte {off}")

    known = {"version", "task", "digest", "seed", "obs_mode", "backend",
             "max_steps", "steps", "obs_dim", "act_dim"}
    return Demonstration(
        task=header["task"],
        config_digest=header["digest"],
        seed=header["seed"],
        obs_mode=header["obs_mode"],
        backend=header.get("backend", "unknown"),
        max_steps=header["max_steps"],
        observations=observations,
        actions=actions,
        rewards=rewards,
        dones=dones,
        extra={k: v for k, v in header.items() if k not in known},
    )


@dataclass
class ReplayReport:
    rewards_match: bool
    dones_match: bool
    replayed_rewards: np.ndarray
    mismatches: list[int]

    @property
    def ok(self) -> bool:
        return self.rewards_match and self.dones_match


def replay_demo(demo: Demonstration, cfg, env_factory=None) -> ReplayReport:
    """Re-run the stored action sequence and compare rewards/dones exactly
    (at the stored float32 precision)."""
    from ..fluids import BACKEND

    if cfg.digest() != demo.config_digest:
        raise DemoCompatibilityError(
            f"current config digest {cfg.digest()} != demo digest {demo.config_digest}"
        )
    if demo.backend != BACKEND:
        import warnings

        warnings.warn(
            f"demo was recorded under the {demo.backend!r} fluid backend but "
            f"{BACKEND!r} is active; bit-exact replay is only guaranteed on the "
            "recording backend",
            stacklevel=2,
        )
    if env_factory is None:
        from ..envs import make_env

        env = make_env(cfg, demo.task)
    else:
        env = env_factory()
    env.reset(demo.seed)
    env.max_steps = demo.max_steps
    replayed = np.empty(len(demo), dtype=np.float32)
    dones = np.empty(len(demo), dtype=bool)
    for i in range(len(demo)):
        _, r, done, _ = env.step(demo.actions[i].astype(np.float64))
        replayed[i] = np.float32(r)
        dones[i] = done
        if done:
            replayed = replayed[: i + 1]
            dones = dones[: i + 1]
            break
    if len(replayed) != len(demo):
        return ReplayReport(False, False, replayed, [len(replayed)])
    mismatches = [
        i for i in range(len(demo))
        if replayed[i] != demo.rewards[i] or dones[i] != demo.dones[i]
    ]
    return ReplayReport(
        rewards_match=all(replayed[i] == demo.rewards[i] for i in range(len(demo))),
        dones_match=all(dones[i] == demo.dones[i] for i in range(len(demo))),
        replayed_rewards=replayed,
        mismatches=mismatches,
    )
