"""Irrigation and suction learning environments.

Gym-style contract: ``reset(seed) -> Observation``, ``step(action) ->
(Observation, reward, done, info)``. Actions are per-joint increments in
[-1, 1] (plus a binary irrigation toggle); each decision advances 5 physics
substeps with linearly interpolated joint targets. Episodes are bit-
deterministic in (seed, action sequence).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..config import RunConfig
from ..experts.clustering import cluster_particles
from ..fluids import ParticleSet, step_fluid
from ..kinematics import forward_kinematics, tool_axis
from ..render import RenderScene, render_frame
from ..scene import (
    Capsule,
    ColliderSet,
    Emitter,
    SuctionField,
    emit_irrigation,
    query_contact,
    spawn_fluid_block,
)
from .curriculum import LessonConfig
from .randomization import sample_world
from .rewards import StateSnapshot, check_completion, compute_reward

DOWN = np.array([0.0, 0.0, -1.0])


class LifecycleError(RuntimeError):
    """step() called on an episode that already finished."""


@dataclass
class Observation:
    vector: np.ndarray  # float32, frame-stacked
    image: np.ndarray | None = None  # uint8 (H, W, 3), vision mode
    initial_image: np.ndarray | None = None  # irrigation vision mode only


@dataclass
class _Snap:
    reward: StateSnapshot
    tip: np.ndarray
    axis: np.ndarray
    target_offset: np.ndarray  # target centroid - tip (zeros if no target)
    cluster_offset: np.ndarray
    remaining_frac: float
    contact: bool


class SurgicalFluidEnv:
    def __init__(self, cfg: RunConfig, task: str | None = None):
        self.cfg = cfg
        self.task = task or cfg.task
        if self.task not in ("irrigation", "suction"):
            raise ValueError(f"unknown task {self.task!r}")
        self.env_cfg = cfg.env
        self.chain = cfg.build_chain()
        self.max_steps = (
            cfg.env.max_steps_irrigation
            if self.task == "irrigation"
            else cfg.env.max_steps_suction
        )
        self.action_dim = 6 if self.task == "irrigation" else 5
        self._active = False

    # ------------------------------------------------------------- lifecycle

    def reset(self, seed: int, lesson: LessonConfig = LessonConfig()) -> Observation:
        env_cfg = self.env_cfg
        self.lesson = lesson
        self.rng = np.random.default_rng(seed)
        self.seed = seed
        world = sample_world(self.task, env_cfg, self.cfg.dr, self.chain, self.rng)
        self.world = world
        self.fluid_params = env_cfg.fluid.to_params(
            cohesion=world.cohesion, viscosity=world.viscosity
        )
        self.q = world.init_q.copy()
        self.particles = ParticleSet()
        for center, count in world.spawn_blocks:
            pos, vel, col, blood = spawn_fluid_block(
                center, count, world.colors["blood"], 1.0, world.spawn_jitter,
                self.rng, spacing=self.fluid_params.rest_spacing,
            )
            self.particles.add(pos, vel, col, blood)
        self.initial_count = self.particles.live_count
        self.blood_ids = self.particles.live_indices()
        self.affected = np.zeros(len(self.blood_ids), dtype=bool)
        self.removed_total = 0
        self.step_count = 0  # physics steps in the agent phase
        self.emitter = Emitter(
            spawn_rate=env_cfg.emitter.spawn_rate,
            spawn_speed=env_cfg.emitter.spawn_speed,
            color=world.colors["irrigation"],
            jitter=env_cfg.emitter.jitter,
        )
        self._active = True
        self._prev_completion = False

        for k in range(env_cfg.settle_steps):
            self._substep(toggle=False, agent_phase=False, index=k - env_cfg.settle_steps)

        self._snap = self._make_snapshot(prev_completion=False)
        frame = self._frame_vector(self._snap)
        self._frames = deque([frame] * env_cfg.frame_stack, maxlen=env_cfg.frame_stack)
        self.initial_image = None
        if env_cfg.obs_mode == "vision":
            self.initial_image = self._render()
        return self._observation()

    def step(self, action):
        if not self._active:
            raise LifecycleError("step() on a finished episode; call reset()")
        action = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        if action.shape != (self.action_dim,):
            raise ValueError(f"action must have shape ({self.action_dim},)")
        scales = np.array([
            self.env_cfg.action_scale_rad,
            self.env_cfg.action_scale_rad,
            self.env_cfg.action_scale_m,
            self.env_cfg.action_scale_rad,
            self.env_cfg.action_scale_rad,
        ])
        toggle = self.task == "irrigation" and action[5] >= 0.5
        q_prev = self.q.copy()
        q_new = self.chain.clamp(q_prev + action[:5] * scales)

        interval = self.env_cfg.decision_interval
        for k in range(1, interval + 1):
            self.q = q_prev + (q_new - q_prev) * (k / interval)
            self._substep(toggle=toggle, agent_phase=True, index=self.step_count)
        self.q = q_new

        prev = self._snap
        new = self._make_snapshot(prev_completion=prev.reward.completion)
        reward, features, weights = compute_reward(
            self.task, prev.reward, new.reward, toggle, self.cfg.reward, self.lesson
        )
        self._snap = new
        self._frames.append(self._frame_vector(new))

        completion_terminates = self.task == "suction" or self.lesson.full_task
        done = (new.reward.completion and completion_terminates) or (
            self.step_count >= self.max_steps
        )
        if done:
            self._active = False
        info = {
            "features": features,
            "weights": weights,
            "live_count": new.reward.live_count,
            "removed_total": self.removed_total,
            "affected_total": int(self.affected.sum()),
            "affected_fraction": self._affected_fraction(),
            "blood_total": len(self.blood_ids),
            "completion": new.reward.completion,
            "physics_steps": self.step_count,
            "toggle": bool(toggle),
        }
        return self._observation(), reward, done, info

    # ------------------------------------------------------------- internals

    def _tool(self):
        pose = forward_kinematics(self.chain, self.q)
        axis = tool_axis(pose)
        return pose.position, axis

    def _capsule(self, tip, axis) -> Capsule:
        return Capsule(tip, tip - axis * self.env_cfg.tool_length,
                       self.env_cfg.tool_radius)

    def _substep(self, toggle: bool, agent_phase: bool, index: int) -> None:
        env_cfg = self.env_cfg
        tip, axis = self._tool()
        capsule = self._capsule(tip, axis)
        colliders = ColliderSet(
            half_extent=env_cfg.tissue.half_extent,
            heightfield=self.world.heightfield,
            capsule=capsule,
        )
        fields = []
        suction_field = None
        if self.task == "suction" and agent_phase:
            scfg = env_cfg.suction
            suction_field = SuctionField(
                apex=tip, axis=axis,
                half_angle=np.deg2rad(scfg.half_angle_deg),
                strength=scfg.strength, cone_height=scfg.cone_height,
                removal_radius=scfg.removal_radius,
                entrainment=scfg.entrainment,
            )
            fields.append(suction_field)
        if self.task == "irrigation" and agent_phase and toggle:
            pos, vel, col, blood = emit_irrigation(self.emitter, tip, axis, True, self.rng)
            self.particles.add(pos, vel, col, blood)

        step_fluid(self.particles, self.fluid_params, colliders, fields, step_index=index)

        if suction_field is not None:
            idx = self.particles.live_indices()
            if len(idx):
                removed = suction_field.removed_mask(self.particles.positions[idx])
                if removed.any():
                    self.particles.kill(idx[removed])
                    self.removed_total += int(removed.sum())
        if self.task == "irrigation":
            blood_vals = self.particles.bloodness[self.blood_ids]
            self.affected |= blood_vals < env_cfg.theta_affect
        if agent_phase:
            self.step_count += 1

    def _affected_fraction(self) -> float:
        if len(self.blood_ids) == 0:
            return 1.0
        return float(self.affected.sum() / len(self.blood_ids))

    def _make_snapshot(self, prev_completion: bool) -> _Snap:
        env_cfg = self.env_cfg
        tip, axis = self._tool()
        tilt = float(np.degrees(np.arccos(np.clip(axis @ DOWN, -1.0, 1.0))))
        contact = query_contact(self._capsule(tip, axis), self.world.heightfield)
        live_idx = self.particles.live_indices()
        live_pos = self.particles.positions[live_idx]

        target_offset = np.zeros(3)
        cluster_offset = np.zeros(3)
        dist = None
        if self.task == "irrigation":
            unaffected = self.blood_ids[~self.affected]
            if len(unaffected):
                pts = self.particles.positions[unaffected]
                centroid = pts.mean(axis=0)
                dist = float(np.linalg.norm(centroid[:2] - tip[:2]))
                target_offset = centroid - tip
                clusters = cluster_particles(pts, 2 * self.fluid_params.kernel_radius,
                                             indices=unaffected, medoids=False)
                nearest = clusters.nearest(tip, horizontal=True)
                if nearest is not None:
                    cluster_offset = nearest.centroid - tip
            remaining = 1.0 - self._affected_fraction()
            completion = check_completion(
                "irrigation", self._affected_fraction(), len(live_idx),
                env_cfg.phi_complete, env_cfg.k_remaining,
            )
        else:
            if len(live_idx):
                centroid = live_pos.mean(axis=0)
                target_offset = centroid - tip
                clusters = cluster_particles(live_pos, 2 * self.fluid_params.kernel_radius,
                                             indices=live_idx, medoids=False)
                nearest = clusters.nearest(tip, horizontal=True)
                if nearest is not None:
                    dist = float(np.linalg.norm(nearest.centroid[:2] - tip[:2]))
                    cluster_offset = nearest.centroid - tip
            remaining = len(live_idx) / max(self.initial_count, 1)
            completion = check_completion(
                "suction", 0.0, len(live_idx),
                env_cfg.phi_complete, env_cfg.k_remaining,
            )

        reward_snap = StateSnapshot(
            affected_total=int(self.affected.sum()) if self.task == "irrigation" else 0,
            removed_total=self.removed_total,
            target_distance=dist,
            tilt_deg=tilt,
            contact=contact,
            completion=completion or prev_completion,
            live_count=int(len(live_idx)),
        )
        return _Snap(reward_snap, tip, axis, target_offset, cluster_offset,
                     float(remaining), contact)

    def _frame_vector(self, snap: _Snap) -> np.ndarray:
        contact = 1.0 if snap.contact else 0.0
        if self.env_cfg.obs_mode == "vision":
            # paper-parity block: raw joint positions + contact flag
            return np.concatenate([self.q, [contact]]).astype(np.float32)
        # vector-only mode: normalized joints, offsets expressed in the
        # yaw-aligned frame and scaled by the container half-extent, so a
        # small MLP does not have to learn the yaw rotation implicitly
        lo, hi = self.chain.lower, self.chain.upper
        qn = (self.q - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
        scale = 1.0 / self.env_cfg.tissue.half_extent
        extra = np.concatenate([
            np.clip(self._to_yaw_frame(snap.target_offset) * scale, -2.0, 2.0),
            np.clip(self._to_yaw_frame(snap.cluster_offset) * scale, -2.0, 2.0),
            [snap.remaining_frac],
        ])
        return np.concatenate([qn, [contact], extra]).astype(np.float32)

    def _to_yaw_frame(self, v: np.ndarray) -> np.ndarray:
        c, s = np.cos(self.q[0]), np.sin(self.q[0])
        return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])

    def _observation(self) -> Observation:
        vector = np.concatenate(list(self._frames)).astype(np.float32)
        if self.env_cfg.obs_mode != "vision":
            return Observation(vector=vector)
        return Observation(
            vector=vector,
            image=self._render(),
            initial_image=self.initial_image if self.task == "irrigation" else None,
        )

    def _render(self) -> np.ndarray:
        tip, axis = self._tool()
        live = self.particles.live_indices()
        scene = RenderScene(
            heightfield=self.world.heightfield,
            half_extent=self.env_cfg.tissue.half_extent,
            wall_height=self.env_cfg.wall_height,
            tissue_color=self.world.colors["tissue"],
            background_color=self.world.colors["background"],
            container_color=self.world.colors["container"],
            tool_color=self.world.colors["tool"],
            capsule=self._capsule(tip, axis),
            particle_positions=self.particles.positions[live],
            particle_colors=np.clip(self.particles.colors[live], 0.0, 1.0),
            splat_radius=self.fluid_params.kernel_radius,
            mesh_resolution=self.env_cfg.render_mesh_resolution,
        )
        return render_frame(scene, self.world.camera, self.world.light)

    # ------------------------------------------------------------- queries

    @property
    def done(self) -> bool:
        return not self._active

    def obs_vector_length(self) -> int:
        per = 6 if self.env_cfg.obs_mode == "vision" else 13
        return per * self.env_cfg.frame_stack

    def snapshot(self) -> _Snap:
        """Privileged state view (scripted experts, debugging)."""
        return self._snap


def make_env(cfg: RunConfig, task: str | None = None) -> SurgicalFluidEnv:
    return SurgicalFluidEnv(cfg, task)
