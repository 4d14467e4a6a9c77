"""Scripted expert policies. Both see privileged particle state through the
env's snapshot, aim the vertical tool via per-step differential IK, and emit
normalized joint increments clipped to the action scale."""

from __future__ import annotations

import numpy as np

from ..kinematics import DOWN_AXIS, jacobian, forward_kinematics, tool_axis


def _wrap_pi(a: float) -> float:
    return (a + np.pi) % (2 * np.pi) - np.pi


def _vertical_tool_config(env, target_position: np.ndarray) -> np.ndarray:
    """Closed-form joint config placing the tip at ``target_position`` with a
    vertical tool, choosing the yaw branch nearest the current yaw.

    The chain's yaw range has a cut at +-pi; the mirror branch (yaw +- pi with
    negated pitch) reaches the same tip, so picking the nearer branch avoids
    multi-hundred-step unwinds when a target lands across the cut.
    """
    chain = env.chain
    fulcrum_z = chain.joints[0].origin.position[2]
    wrist_off = abs(chain.joints[4].origin.position[2])
    tip_len = abs(chain.tip_offset.position[2])
    tx, ty, tz = np.asarray(target_position, dtype=np.float64)
    depth = fulcrum_z - tip_len - tz
    r = float(np.hypot(tx, ty))
    depth = max(depth, 1e-6)
    alpha = float(np.arctan2(r, depth))
    shaft = float(np.hypot(r, depth))
    q3 = shaft - wrist_off
    yaw_a = float(np.arctan2(-tx, ty)) if r > 1e-9 else float(env.q[0])

    q1 = env.q[0]
    candidates = [(yaw_a, alpha), (_wrap_pi(yaw_a + np.pi), -alpha),
                  (_wrap_pi(yaw_a - np.pi), -alpha)]
    yaw, pitch = min(candidates, key=lambda c: abs(_wrap_pi(c[0] - q1)))
    return chain.clamp(np.array([yaw, pitch, q3, 0.0, -pitch]))


def _joint_action(env, target_position: np.ndarray) -> np.ndarray:
    """Normalized joint increments walking toward the vertical-tool config for
    ``target_position``, clipped to the per-decision action scale."""
    q_des = _vertical_tool_config(env, target_position)
    dq = q_des - env.q
    dq[0] = _wrap_pi(dq[0])
    scales = np.array([
        env.env_cfg.action_scale_rad,
        env.env_cfg.action_scale_rad,
        env.env_cfg.action_scale_m,
        env.env_cfg.action_scale_rad,
        env.env_cfg.action_scale_rad,
    ])
    return np.clip(dq / scales, -1.0, 1.0)


def scripted_irrigation_action(env) -> np.ndarray:
    """Hover above the unaffected-blood centroid; irrigate only when near."""
    snap = env.snapshot()
    if env.snapshot().remaining_frac <= 0.0:
        return np.zeros(6)
    centroid = snap.tip + snap.target_offset
    horizontal = float(np.linalg.norm(snap.target_offset[:2]))
    target = np.array([centroid[0], centroid[1],
                       centroid[2] + env.env_cfg.hover_height])
    action = _joint_action(env, target)
    toggle = 1.0 if horizontal < env.cfg.reward.proximity_threshold else 0.0
    return np.concatenate([action, [toggle]])


class SuctionExpert:
    """Hover-then-descend over the nearest liquid cluster.

    Target selection is sticky: the medoid particle of the nearest cluster is
    picked once and the expert then follows whichever cluster currently
    contains that particle, aiming at the cluster's live centroid (the medoid
    alone dithers on large scattering pools; the instantaneous nearest cluster
    flips and zigzags). A new target is picked only when the tracked particle
    is suctioned.
    """

    def __init__(self):
        self.target_id: int | None = None

    def __call__(self, env, obs=None) -> np.ndarray:
        from .clustering import cluster_particles, medoid_index

        snap = env.snapshot()
        live = env.particles.live_indices()
        if len(live) == 0:
            return np.zeros(5)
        pts = env.particles.positions[live]
        clusters = cluster_particles(pts, 2 * env.fluid_params.kernel_radius,
                                     indices=live, medoids=False)
        if self.target_id is None or not env.particles.alive[self.target_id]:
            nearest = clusters.nearest(snap.tip, horizontal=True)
            self.target_id = medoid_index(env.particles.positions[nearest.indices],
                                          nearest.indices)
        holder = None
        for c in clusters:
            if self.target_id in c.indices:
                holder = c
                break
        if holder is None or len(holder.indices) <= 3:
            aim = env.particles.positions[self.target_id]
        else:
            aim = holder.centroid
        horizontal = float(np.linalg.norm(aim[:2] - snap.tip[:2]))
        removal = env.env_cfg.suction.removal_radius
        if horizontal > env.cfg.reward.proximity_threshold:
            z = aim[2] + env.env_cfg.hover_height + 0.02
        else:
            z = aim[2] + 1.5 * removal
        return _joint_action(env, np.array([aim[0], aim[1], z]))


def scripted_suction_action(env) -> np.ndarray:
    """Single-shot variant: fresh nearest-cluster selection every call."""
    return SuctionExpert()(env)


def scripted_policy(task: str):
    """Stateful per-episode policy callable for recording and evaluation."""
    if task == "irrigation":
        return lambda env, obs: scripted_irrigation_action(env)
    return SuctionExpert()
