"""5-DoF arm model: forward kinematics, geometric Jacobian, iterative IK.

The chain mirrors a patient-side manipulator carrying a 2-DoF suction/irrigator
instrument: yaw and pitch about a fixed fulcrum, prismatic insertion along the
shaft, tool roll, and a distal wrist pitch. The tool axis is the tip frame's
local -z (pointing down at the zero configuration).

All functions are pure; chains are immutable descriptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOOL_AXIS_LOCAL = np.array([0.0, 0.0, -1.0])
DOWN_AXIS = np.array([0.0, 0.0, -1.0])


# ----------------------------------------------------------------- quaternions
# wxyz convention, unit-norm

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    # q v q*; expanded form avoids building the rotation matrix
    w = q[0]
    u = q[1:]
    return 2.0 * np.dot(u, v) * u + (w * w - np.dot(u, u)) * v + 2.0 * w * np.cross(u, v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    qx = quat_from_axis_angle([1, 0, 0], roll)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    return quat_mul(qz, quat_mul(qy, qx))


# ----------------------------------------------------------------- pose

@dataclass
class Pose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.orientation = np.asarray(self.orientation, dtype=np.float64)
        norm = np.linalg.norm(self.orientation)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {norm} not within 1e-9 of 1")

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_normalize(quat_mul(self.orientation, other.orientation)),
        )

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, p)

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, v)

    @staticmethod
    def from_xyz_rpy(xyz=(0, 0, 0), rpy=(0, 0, 0)) -> "Pose":
        return Pose(np.asarray(xyz, float), quat_from_rpy(*rpy))


# ----------------------------------------------------------------- chain

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass
class Joint:
    kind: str
    axis: np.ndarray
    origin: Pose
    limits: tuple[float, float]

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        self.axis = np.asarray(self.axis, dtype=np.float64)
        n = np.linalg.norm(self.axis)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("joint axis must be unit-norm")
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError("joint limits must satisfy lo < hi")


@dataclass
class KinematicChain:
    joints: list[Joint]
    tip_offset: Pose

    def __post_init__(self):
        if len(self.joints) != 5:
            raise ValueError("chain must have exactly 5 joints")

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def mid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def default_chain(
    fulcrum_height: float = 0.20,
    wrist_offset: float = 0.015,
    tip_length: float = 0.02,
) -> KinematicChain:
    """PSM-like chain: yaw, pitch through a fulcrum, insertion, roll, wrist pitch."""
    joints = [
        # yaw range exceeds +-pi so the nearest wrap branch is always walkable
        Joint(REVOLUTE, [0, 0, 1], Pose.from_xyz_rpy((0, 0, fulcrum_height)), (-2 * np.pi, 2 * np.pi)),
        Joint(REVOLUTE, [1, 0, 0], Pose.from_xyz_rpy(), (-0.75, 0.75)),
        Joint(PRISMATIC, [0, 0, -1], Pose.from_xyz_rpy(), (0.04, 0.24)),
        Joint(REVOLUTE, [0, 0, 1], Pose.from_xyz_rpy(), (-np.pi, np.pi)),
        Joint(REVOLUTE, [1, 0, 0], Pose.from_xyz_rpy((0, 0, -wrist_offset)), (-0.9, 0.9)),
    ]
    return KinematicChain(joints, Pose.from_xyz_rpy((0, 0, -tip_length)))


def chain_from_config(cfg: dict) -> KinematicChain:
    joints = [
        Joint(
            j["kind"],
            j["axis"],
            Pose.from_xyz_rpy(j.get("xyz", (0, 0, 0)), j.get("rpy", (0, 0, 0))),
            tuple(j["limits"]),
        )
        for j in cfg["joints"]
    ]
    tip = cfg.get("tip", {})
    return KinematicChain(joints, Pose.from_xyz_rpy(tip.get("xyz", (0, 0, 0)),
                                                    tip.get("rpy", (0, 0, 0))))


# ----------------------------------------------------------------- FK / jacobian

class _ChainArrays:
    """Flattened chain description (python-native tuples) so the FK loop runs
    on scalars instead of numpy small-array ops."""

    def __init__(self, chain: KinematicChain):
        self.origin_pos = [tuple(map(float, j.origin.position)) for j in chain.joints]
        self.origin_quat = [tuple(map(float, j.origin.orientation)) for j in chain.joints]
        self.axes = [tuple(map(float, j.axis)) for j in chain.joints]
        self.prismatic = [j.kind == PRISMATIC for j in chain.joints]
        self.tip_pos = tuple(map(float, chain.tip_offset.position))
        self.tip_quat = tuple(map(float, chain.tip_offset.orientation))


_ARRAY_CACHE: dict[int, _ChainArrays] = {}


def _arrays(chain: KinematicChain) -> _ChainArrays:
    key = id(chain)
    arr = _ARRAY_CACHE.get(key)
    if arr is None:
        arr = _ChainArrays(chain)
        _ARRAY_CACHE[key] = arr
    return arr


def _fk_raw(chain: KinematicChain, q: np.ndarray):
    """Returns (tip position, tip quaternion, joint world origins, joint world axes).

    Scalar math throughout: this sits under every env substep, expert action,
    and IK iteration, where numpy's small-array overhead dominates.
    """
    from math import cos, sin, sqrt

    a = _arrays(chain)
    px = py = pz = 0.0
    rw, rx, ry, rz = 1.0, 0.0, 0.0, 0.0
    origins = np.empty((5, 3))
    axes = np.empty((5, 3))

    def rot(vx, vy, vz):
        # rotate v by quaternion (rw, rx, ry, rz)
        dot_uv = rx * vx + ry * vy + rz * vz
        dot_uu = rx * rx + ry * ry + rz * rz
        cx = ry * vz - rz * vy
        cy = rz * vx - rx * vz
        cz = rx * vy - ry * vx
        s = rw * rw - dot_uu
        return (
            2 * dot_uv * rx + s * vx + 2 * rw * cx,
            2 * dot_uv * ry + s * vy + 2 * rw * cy,
            2 * dot_uv * rz + s * vz + 2 * rw * cz,
        )

    def mul(bw, bx, by, bz):
        nonlocal rw, rx, ry, rz
        rw, rx, ry, rz = (
            rw * bw - rx * bx - ry * by - rz * bz,
            rw * bx + rx * bw + ry * bz - rz * by,
            rw * by - rx * bz + ry * bw + rz * bx,
            rw * bz + rx * by - ry * bx + rz * bw,
        )

    for k in range(5):
        ox, oy, oz = a.origin_pos[k]
        if ox or oy or oz:
            dx, dy, dz = rot(ox, oy, oz)
            px += dx
            py += dy
            pz += dz
        qw, qx, qy, qz = a.origin_quat[k]
        if qw != 1.0 or qx or qy or qz:
            mul(qw, qx, qy, qz)
        ax0, ax1, ax2 = a.axes[k]
        wx, wy, wz = rot(ax0, ax1, ax2)
        origins[k, 0] = px
        origins[k, 1] = py
        origins[k, 2] = pz
        axes[k, 0] = wx
        axes[k, 1] = wy
        axes[k, 2] = wz
        qk = float(q[k])
        if a.prismatic[k]:
            px += wx * qk
            py += wy * qk
            pz += wz * qk
        else:
            half = 0.5 * qk
            s = sin(half)
            mul(cos(half), ax0 * s, ax1 * s, ax2 * s)

    tx, ty, tz = a.tip_pos
    if tx or ty or tz:
        dx, dy, dz = rot(tx, ty, tz)
        px += dx
        py += dy
        pz += dz
    qw, qx, qy, qz = a.tip_quat
    if qw != 1.0 or qx or qy or qz:
        mul(qw, qx, qy, qz)
    norm = sqrt(rw * rw + rx * rx + ry * ry + rz * rz)
    quat = np.array([rw / norm, rx / norm, ry / norm, rz / norm])
    return np.array([px, py, pz]), quat, origins, axes


def fk_frames(chain: KinematicChain, q: np.ndarray):
    """World origin and axis of every joint plus the final tip pose."""
    p, r, origins, axes = _fk_raw(chain, q)
    frames = [(origins[k], axes[k]) for k in range(5)]
    return frames, Pose(p, r)


def forward_kinematics(chain: KinematicChain, q: np.ndarray) -> Pose:
    if not np.isfinite(q).all():
        raise ValueError("joint configuration must be finite")
    p, r, _, _ = _fk_raw(chain, q)
    return Pose(p, r)


def tool_axis(pose: Pose) -> np.ndarray:
    return pose.rotate(TOOL_AXIS_LOCAL)


def jacobian(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """6x5 geometric Jacobian at the tool tip: rows = (linear; angular)."""
    tip_p, _, origins, axes = _fk_raw(chain, q)
    pris = _arrays(chain).prismatic
    J = np.zeros((6, 5))
    for k in range(5):
        if pris[k]:
            J[:3, k] = axes[k]
        else:
            J[:3, k] = np.cross(axes[k], tip_p - origins[k])
            J[3:, k] = axes[k]
    return J


# ----------------------------------------------------------------- IK

@dataclass
class IKResult:
    q: np.ndarray
    converged: bool
    iterations: int
    pos_error: float
    axis_error: float  # rad between current and target tool axis


def solve_ik(
    chain: KinematicChain,
    q0: np.ndarray,
    target: Pose,
    tol_pos: float = 5e-4,
    tol_rot: float = 2e-2,
    max_iters: int = 200,
    damping: float = 0.05,
    step_scale: float = 1.0,
    ignore_orientation: bool = False,
) -> IKResult:
    """Damped least-squares IK with per-iteration joint clamping.

    The damping is error-adaptive (Levenberg-Marquardt style: lambda =
    |e|^2 + damping^4) with an improvement check, which handles the fulcrum
    and straight-wrist singularities that stall a fixed-damping solver.

    A 5-DoF chain cannot track full 6-DoF poses, so the rotational task keeps
    only the tool-axis direction error (cross product of current and target
    axes), which never asks for spin about the tool axis.
    """
    q = chain.clamp(np.asarray(q0, dtype=np.float64).copy())
    a_tgt = tool_axis(target)
    rot_weight = 0.05  # meters of position error equivalent per radian

    # deterministic kicks to escape singular valleys. The wrist-only kicks
    # (first rows) handle the straight-wrist case where the roll column's
    # effect on the tool axis scales with sin(q5) and LM crawls; they keep the
    # position-solving joints at the best iterate. The later rows handle
    # yaw-quadrant multimodality.
    half_pi = np.pi / 2
    kicks = np.array([
        [0.0, 0.0, 0.0, half_pi, 0.3],
        [0.0, 0.0, 0.0, -half_pi, 0.3],
        [0.0, 0.0, 0.0, np.pi, -0.3],
        [0.0, 0.0, 0.0, half_pi, -0.3],
        [0.0, 0.0, 0.0, -half_pi, -0.3],
        [0.9, 0.2, 0.0, 0.9, 0.2],
        [-0.9, 0.2, 0.0, -0.9, 0.2],
        [2.0, -0.2, 0.0, 1.0, 0.3],
        [-2.0, -0.2, 0.0, -1.0, 0.3],
    ])

    def task_error(qv):
        """Weighted task residual e, plus (pos_err, axis angle)."""
        p, r, _, _ = _fk_raw(chain, qv)
        e_pos = target.position - p
        a_cur = quat_rotate(r, TOOL_AXIS_LOCAL)
        ang = float(np.arccos(np.clip(np.dot(a_cur, a_tgt), -1.0, 1.0)))
        if ignore_orientation:
            e = e_pos
        else:
            e = np.concatenate([e_pos, rot_weight * np.cross(a_cur, a_tgt)])
        return e, float(np.linalg.norm(e_pos)), ang

    e, pos_err, ang = task_error(q)
    best = (q.copy(), pos_err, ang)
    best_cost = float(e @ e)
    stall = 0
    kick_idx = 0
    lam_boost = 1.0

    for it in range(max_iters + 1):
        if pos_err < tol_pos and (ignore_orientation or ang < tol_rot):
            return IKResult(q, True, it, pos_err, ang)
        if it == max_iters:
            break

        if stall >= 8 and kick_idx < len(kicks):
            q = chain.clamp(best[0] + kicks[kick_idx])
            kick_idx += 1
            stall = 0
            lam_boost = 1.0
            e, pos_err, ang = task_error(q)
            continue

        J = jacobian(chain, q)
        task_J = J[:3] if ignore_orientation else np.vstack([J[:3], rot_weight * J[3:]])
        cost = float(e @ e)
        # error-adaptive damping (Levenberg-Marquardt, Sugihara variant)
        lam = cost * lam_boost + damping**4
        H = task_J.T @ task_J
        H[np.diag_indices_from(H)] += lam
        dq = np.linalg.solve(H, task_J.T @ e)
        q_new = chain.clamp(q + step_scale * dq)
        e_new, pos_new, ang_new = task_error(q_new)
        if float(e_new @ e_new) < cost:
            q, e, pos_err, ang = q_new, e_new, pos_new, ang_new
            new_cost = float(e @ e)
            if new_cost < best_cost:
                # stall means "not shrinking fast enough", not "not shrinking"
                if new_cost < best_cost * 0.98:
                    stall = 0
                else:
                    stall += 1
                best_cost = new_cost
                best = (q.copy(), pos_err, ang)
            else:
                stall += 1
            lam_boost = max(lam_boost * 0.5, 1.0)
        else:
            lam_boost = min(lam_boost * 8.0, 1e6)
            stall += 1

    return IKResult(best[0], False, max_iters, best[1], best[2])
