"""Task scene: Bezier tissue over a container, fluid spawning, irrigation
emitter, cone-shaped suction field, and the collision set the fluid solver
projects against."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# ----------------------------------------------------------------- bezier


def bernstein3(t: float | np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    u = 1.0 - t
    return np.stack([u**3, 3 * t * u**2, 3 * t**2 * u, t**3], axis=-1)


def bernstein3_deriv(t: float | np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    u = 1.0 - t
    return np.stack([-3 * u**2, 3 * u**2 - 6 * t * u, 6 * t * u - 3 * t**2, 3 * t**2], axis=-1)


@dataclass
class BezierSurface:
    """4x4 control grid; x/y control coordinates are uniformly spaced so the
    (u, v) -> (x, y) map is affine and heights can be queried by position."""

    control: np.ndarray  # (4, 4, 3)

    def __post_init__(self):
        self.control = np.asarray(self.control, dtype=np.float64)
        if self.control.shape != (4, 4, 3):
            raise ValueError("control grid must be 4x4x3")

    def point(self, u: float, v: float) -> np.ndarray:
        bu = bernstein3(u)
        bv = bernstein3(v)
        return np.einsum("i,j,ijk->k", bu, bv, self.control)

    def height(self, u, v) -> np.ndarray:
        bu = bernstein3(u)
        bv = bernstein3(v)
        return np.einsum("...i,...j,ij->...", bu, bv, self.control[:, :, 2])

    def normal(self, u: float, v: float) -> np.ndarray:
        bu, bv = bernstein3(u), bernstein3(v)
        du, dv = bernstein3_deriv(u), bernstein3_deriv(v)
        su = np.einsum("i,j,ijk->k", du, bv, self.control)
        sv = np.einsum("i,j,ijk->k", bu, dv, self.control)
        n = np.cross(su, sv)
        return n / np.linalg.norm(n)


@dataclass
class TissueHeightfield:
    """Sampled tissue heights over the container footprint, plus normals."""

    half_extent: float
    heights: np.ndarray  # (res, res), heights[i, j] at (xs[i], ys[j])
    normals: np.ndarray  # (res, res, 3)

    @property
    def resolution(self) -> int:
        return self.heights.shape[0]

    def grid_coords(self) -> np.ndarray:
        return np.linspace(-self.half_extent, self.half_extent, self.resolution)

    def height_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Bilinear interpolation, clamped to the footprint."""
        res = self.resolution
        a = self.half_extent
        scale = (res - 1) / (2 * a)
        fx = np.clip((np.asarray(x) + a) * scale, 0, res - 1 - 1e-12)
        fy = np.clip((np.asarray(y) + a) * scale, 0, res - 1 - 1e-12)
        i0 = fx.astype(np.int64)
        j0 = fy.astype(np.int64)
        tx = fx - i0
        ty = fy - j0
        h = self.heights
        return (
            h[i0, j0] * (1 - tx) * (1 - ty)
            + h[i0 + 1, j0] * tx * (1 - ty)
            + h[i0, j0 + 1] * (1 - tx) * ty
            + h[i0 + 1, j0 + 1] * tx * ty
        )

    def max_height(self) -> float:
        return float(self.heights.max())

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.heights.tobytes()).hexdigest()[:12]


@dataclass
class TissueConfig:
    half_extent: float = 0.075
    rim_height: float = 0.005
    height_band: tuple[float, float] = (0.005, 0.035)
    resolution: int = 64


def generate_tissue(rng: np.random.Generator, cfg: TissueConfig):
    """Random tissue: border control heights pinned to the rim, the 2x2
    interior drawn uniformly from the height band."""
    lo, hi = cfg.height_band
    if not hi >= lo:
        raise ValueError("height band must be non-empty")
    a = cfg.half_extent
    xs = np.linspace(-a, a, 4)
    control = np.zeros((4, 4, 3))
    for i in range(4):
        for j in range(4):
            control[i, j, 0] = xs[i]
            control[i, j, 1] = xs[j]
            border = i in (0, 3) or j in (0, 3)
            control[i, j, 2] = cfg.rim_height if border else rng.uniform(lo, hi)
    surface = BezierSurface(control)
    return surface, sample_heightfield(surface, cfg)


def sample_heightfield(surface: BezierSurface, cfg: TissueConfig) -> TissueHeightfield:
    res = cfg.resolution
    t = np.linspace(0.0, 1.0, res)
    hz = surface.height(t[:, None], t[None, :])
    normals = np.empty((res, res, 3))
    for i, u in enumerate(t):
        for j, v in enumerate(t):
            normals[i, j] = surface.normal(u, v)
    return TissueHeightfield(cfg.half_extent, hz, normals)


# ----------------------------------------------------------------- spawning

def spawn_fluid_block(center, count, color, bloodness, jitter, rng,
                      spacing=0.0077):
    """``count`` particles on a jittered cubic lattice stacked above ``center``.

    Returns (positions, velocities, colors, bloodness) arrays.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    center = np.asarray(center, dtype=np.float64)
    if count == 0:
        return (np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    side = int(np.ceil(count ** (1.0 / 3.0)))
    pts = []
    for iz in range(side):
        for iy in range(side):
            for ix in range(side):
                pts.append((ix, iy, iz))
                if len(pts) == count:
                    break
            if len(pts) == count:
                break
        if len(pts) == count:
            break
    pts = np.asarray(pts, dtype=np.float64)
    offset = (side - 1) / 2.0
    pos = np.empty((count, 3))
    pos[:, 0] = center[0] + (pts[:, 0] - offset) * spacing
    pos[:, 1] = center[1] + (pts[:, 1] - offset) * spacing
    pos[:, 2] = center[2] + pts[:, 2] * spacing
    if jitter > 0:
        pos += rng.uniform(-jitter, jitter, size=(count, 3))
    colors = np.tile(np.asarray(color, dtype=np.float64), (count, 1))
    blood = np.full(count, float(bloodness))
    return pos, np.zeros((count, 3)), colors, blood


@dataclass
class Emitter:
    """Irrigation nozzle anchored to the tool tip."""

    spawn_rate: int = 5  # particles per physics step while active
    spawn_speed: float = 0.5  # m/s along the tool axis
    color: np.ndarray = field(default_factory=lambda: np.array([0.9, 0.25, 0.25]))
    jitter: float = 0.002
    nozzle_offset: float = 0.004  # spawn distance past the tip, clears the capsule

    def __post_init__(self):
        self.color = np.asarray(self.color, dtype=np.float64)
        if self.spawn_rate < 0:
            raise ValueError("spawn rate must be >= 0")


def emit_irrigation(emitter: Emitter, tip, axis, active: bool, rng):
    """Spawn ``spawn_rate`` particles at the nozzle when active; bloodness 0."""
    if not active or emitter.spawn_rate == 0:
        return (np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0))
    n = emitter.spawn_rate
    tip = np.asarray(tip, dtype=np.float64)
    axis = np.asarray(axis, dtype=np.float64)
    pos = tip + emitter.nozzle_offset * axis + rng.uniform(
        -emitter.jitter, emitter.jitter, size=(n, 3)
    )
    vel = np.tile(emitter.spawn_speed * axis, (n, 1))
    vel += rng.uniform(-0.05, 0.05, size=(n, 3)) * emitter.spawn_speed
    colors = np.tile(emitter.color, (n, 1))
    return pos, vel, colors, np.zeros(n)


# ----------------------------------------------------------------- suction

@dataclass
class SuctionField:
    """Cone-shaped force field at the tool tip pulling particles to the apex."""

    apex: np.ndarray
    axis: np.ndarray  # unit, pointing from the tip into the scene
    half_angle: float = np.deg2rad(30.0)
    strength: float = 60.0  # m/s^2 at the apex, linear falloff to the cone base
    cone_height: float = 0.06
    removal_radius: float = 0.02
    entrainment: float = 6.0  # 1/s velocity damping inside the cone

    def __post_init__(self):
        self.apex = np.asarray(self.apex, dtype=np.float64)
        self.axis = np.asarray(self.axis, dtype=np.float64)
        if not 0 < self.half_angle < np.pi / 2:
            raise ValueError("half angle must be in (0, pi/2)")
        if self.removal_radius <= 0:
            raise ValueError("removal radius must be positive")

    def accel(self, positions: np.ndarray, velocities: np.ndarray | None = None) -> np.ndarray:
        """Acceleration toward the apex with linear falloff; particles inside
        the cone are also velocity-damped (entrainment), which stops near
        misses from slingshotting past the apex."""
        u = positions - self.apex
        d = np.linalg.norm(u, axis=1)
        proj = u @ self.axis
        cos_half = np.cos(self.half_angle)
        inside = (proj > 0) & (d <= self.cone_height) & (proj >= d * cos_half)
        mag = self.strength * np.maximum(1.0 - d / self.cone_height, 0.0)
        out = np.zeros_like(positions)
        sel = inside & (d > 1e-12)
        out[sel] = -u[sel] / d[sel, None] * mag[sel, None]
        if velocities is not None and self.entrainment > 0:
            out[inside] -= self.entrainment * velocities[inside]
        return out

    def removed_mask(self, positions: np.ndarray) -> np.ndarray:
        u = positions - self.apex
        d = np.linalg.norm(u, axis=1)
        proj = u @ self.axis
        return (proj >= 0) & (d <= self.removal_radius)


def apply_suction(field: SuctionField, positions: np.ndarray):
    """(acceleration per particle, indices removed this step)."""
    return field.accel(positions), np.flatnonzero(field.removed_mask(positions))


# ----------------------------------------------------------------- collisions

def point_segment_distance(points: np.ndarray, p0: np.ndarray, p1: np.ndarray):
    """Distance from each point to segment p0-p1 and the closest points."""
    seg = p1 - p0
    seg_len2 = float(seg @ seg)
    if seg_len2 < 1e-18:
        closest = np.tile(p0, (len(points), 1))
    else:
        t = np.clip((points - p0) @ seg / seg_len2, 0.0, 1.0)
        closest = p0 + t[:, None] * seg
    delta = points - closest
    return np.linalg.norm(delta, axis=1), closest


@dataclass
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=np.float64)
        self.p1 = np.asarray(self.p1, dtype=np.float64)


@dataclass
class ColliderSet:
    """Container walls + tissue heightfield + optional tool capsule."""

    half_extent: float
    heightfield: TissueHeightfield | None = None
    capsule: Capsule | None = None
    floor: float = 0.0

    def project(self, positions: np.ndarray, tol: float) -> np.ndarray:
        pos = positions.copy()
        if self.capsule is not None:
            dist, closest = point_segment_distance(pos, self.capsule.p0, self.capsule.p1)
            skin = self.capsule.radius + tol
            inside = dist < skin
            if inside.any():
                d = dist[inside]
                delta = pos[inside] - closest[inside]
                # degenerate on-axis points get pushed along +x
                bad = d < 1e-12
                dirs = np.where(bad[:, None], np.array([1.0, 0, 0]), delta / np.where(bad, 1.0, d)[:, None])
                pos[inside] = closest[inside] + dirs * skin
        a = self.half_extent - tol
        np.clip(pos[:, 0], -a, a, out=pos[:, 0])
        np.clip(pos[:, 1], -a, a, out=pos[:, 1])
        if self.heightfield is not None:
            hz = self.heightfield.height_at(pos[:, 0], pos[:, 1])
            low = pos[:, 2] < hz + tol
            pos[low, 2] = hz[low] + tol
        low = pos[:, 2] < self.floor + tol
        pos[low, 2] = self.floor + tol
        return pos


def resolve_scene_collisions(positions: np.ndarray, colliders: ColliderSet,
                             tol: float = 1e-4) -> np.ndarray:
    return colliders.project(positions, tol)


CONTACT_SUPERSAMPLE = 4


def _surface_samples(heightfield: TissueHeightfield, lo_x, hi_x, lo_y, hi_y):
    """Bilinear surface points on a supersampled grid inside the given box."""
    a = heightfield.half_extent
    res = heightfield.resolution
    step = 2 * a / ((res - 1) * CONTACT_SUPERSAMPLE)
    xs_all = np.arange(-a, a + step / 2, step)
    xs = xs_all[(xs_all >= lo_x) & (xs_all <= hi_x)]
    ys = xs_all[(xs_all >= lo_y) & (xs_all <= hi_y)]
    if len(xs) == 0 or len(ys) == 0:
        return np.zeros((0, 3))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = heightfield.height_at(gx.ravel(), gy.ravel())
    return np.stack([gx.ravel(), gy.ravel(), gz], axis=1)


def query_contact(capsule: Capsule, heightfield: TissueHeightfield,
                  margin: float = 0.004) -> bool:
    """True iff the capsule touches or penetrates the tissue surface.

    Tests supersampled bilinear surface points against the capsule; restricting
    to the capsule's xy footprint (+radius+margin) gives the same flag as
    scanning the whole surface, since points outside it cannot be within the
    capsule radius.
    """
    r = capsule.radius
    lo_x = min(capsule.p0[0], capsule.p1[0]) - r - margin
    hi_x = max(capsule.p0[0], capsule.p1[0]) + r + margin
    lo_y = min(capsule.p0[1], capsule.p1[1]) - r - margin
    hi_y = max(capsule.p0[1], capsule.p1[1]) + r + margin
    pts = _surface_samples(heightfield, lo_x, hi_x, lo_y, hi_y)
    if len(pts) == 0:
        return False
    dist, _ = point_segment_distance(pts, capsule.p0, capsule.p1)
    return bool(np.any(dist <= r))
