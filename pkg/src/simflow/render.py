"""Deterministic software rasterizer for the RGB observations.

Two passes: (1) shaded geometry (background, tissue mesh, container walls,
tool) into a color+depth buffer; (2) particles splatted as screen-space discs,
unlit, nearest-depth wins. Colors on fluid pixels are exactly the particles'
stored colors so the diffusion state is what the agent sees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import Pose, quat_conj, quat_rotate
from .scene import Capsule, TissueHeightfield, point_segment_distance


@dataclass
class Camera:
    pose: Pose
    fov_y: float = np.deg2rad(45.0)
    width: int = 84
    height: int = 84

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("image size must be at least 8x8")
        if not 0 < self.fov_y < np.pi:
            raise ValueError("fov must be in (0, pi)")

    @property
    def focal(self) -> float:
        return self.height / (2.0 * np.tan(self.fov_y / 2.0))


def look_at(eye, target, up=(0, 0, 1)) -> Pose:
    """Camera pose: +z forward toward target, +x right, +y down (image coords)."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(right)
    if n < 1e-9:  # looking straight along up: pick an arbitrary right
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / n
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=1)
    # rotation matrix -> quaternion (w, x, y, z)
    tr = np.trace(R)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k]) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    return Pose(eye, q / np.linalg.norm(q))


@dataclass
class DirectionalLight:
    direction: np.ndarray = field(default_factory=lambda: np.array([0.3, -0.25, -1.0]) / np.linalg.norm([0.3, -0.25, -1.0]))
    intensity: float = 1.0
    shadow_strength: float = 0.4

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-9:
            self.direction = self.direction / n


def project_point(camera: Camera, point) -> tuple[float, float, float] | None:
    """(u, v, depth) in pixels, or None when the point is behind the camera."""
    p = np.asarray(point, dtype=np.float64)
    pc = quat_rotate(quat_conj(camera.pose.orientation), p - camera.pose.position)
    if pc[2] <= 1e-9:
        return None
    f = camera.focal
    u = camera.width / 2.0 + f * pc[0] / pc[2]
    v = camera.height / 2.0 + f * pc[1] / pc[2]
    return u, v, float(pc[2])


def _project_many(camera: Camera, pts: np.ndarray):
    q = camera.pose.orientation
    w, x, y, z = q
    R = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
    pc = (pts - camera.pose.position) @ R  # R^T applied from the right
    return pc


@dataclass
class RenderScene:
    """Everything render_frame needs, assembled by the environment."""

    heightfield: TissueHeightfield
    half_extent: float = 0.075
    wall_height: float = 0.015
    tissue_color: np.ndarray = field(default_factory=lambda: np.array([0.82, 0.62, 0.55]))
    background_color: np.ndarray = field(default_factory=lambda: np.array([0.45, 0.45, 0.48]))
    container_color: np.ndarray = field(default_factory=lambda: np.array([0.55, 0.55, 0.58]))
    tool_color: np.ndarray = field(default_factory=lambda: np.array([0.7, 0.7, 0.75]))
    capsule: Capsule | None = None
    particle_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    particle_colors: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    splat_radius: float = 0.01
    mesh_resolution: int = 20


def _shade(color, normal, light: DirectionalLight, ambient=0.35):
    lam = max(0.0, float(np.dot(normal, -light.direction)))
    return np.clip(np.asarray(color) * (ambient + (1 - ambient) * light.intensity * lam), 0, 1)


def _raster_triangle(color_buf, depth_buf, wpos_buf, verts_px, depths, wverts, color):
    """Rasterize one triangle with perspective-correct depth/world interpolation."""
    H, W, _ = color_buf.shape
    xs = verts_px[:, 0]
    ys = verts_px[:, 1]
    x0 = max(int(np.floor(xs.min() - 0.5)), 0)
    x1 = min(int(np.ceil(xs.max() + 0.5)), W - 1)
    y0 = max(int(np.floor(ys.min() - 0.5)), 0)
    y1 = min(int(np.ceil(ys.max() + 0.5)), H - 1)
    if x1 < x0 or y1 < y0:
        return
    px, py = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)
    a, b, c = verts_px
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if abs(det) < 1e-12:
        return
    w0 = ((b[0] - px) * (c[1] - py) - (c[0] - px) * (b[1] - py)) / det
    w1 = ((c[0] - px) * (a[1] - py) - (a[0] - px) * (c[1] - py)) / det
    w2 = 1.0 - w0 - w1
    inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
    if not inside.any():
        return
    inv_z = w0 / depths[0] + w1 / depths[1] + w2 / depths[2]
    z = 1.0 / inv_z
    yy, xx = np.nonzero(inside)
    gy = yy + y0
    gx = xx + x0
    zi = z[yy, xx]
    closer = zi < depth_buf[gy, gx]
    if not closer.any():
        return
    gy, gx, zi = gy[closer], gx[closer], zi[closer]
    depth_buf[gy, gx] = zi
    color_buf[gy, gx] = color
    if wpos_buf is not None:
        w0s = w0[yy, xx][closer]
        w1s = w1[yy, xx][closer]
        w2s = w2[yy, xx][closer]
        wp = (
            wverts[0] * (w0s / depths[0])[:, None]
            + wverts[1] * (w1s / depths[1])[:, None]
            + wverts[2] * (w2s / depths[2])[:, None]
        ) * zi[:, None]
        wpos_buf[gy, gx] = wp


def _ray_hits_capsule(origins: np.ndarray, direction: np.ndarray, cap: Capsule) -> np.ndarray:
    """Does the ray origin + t*direction (t>=0) pass within the capsule radius?"""
    # closest approach between each ray and the capsule segment, coarse but
    # adequate for a small occluder: sample the segment densely
    ts = np.linspace(0.0, 1.0, 24)
    seg_pts = cap.p0 + ts[:, None] * (cap.p1 - cap.p0)
    hit = np.zeros(len(origins), dtype=bool)
    d = direction / np.linalg.norm(direction)
    for sp in seg_pts:
        rel = sp - origins
        t = rel @ d
        t = np.maximum(t, 0.0)
        closest = origins + t[:, None] * d
        hit |= np.linalg.norm(sp - closest, axis=1) <= cap.radius
    return hit


def render_frame(scene: RenderScene, camera: Camera, light: DirectionalLight,
                 return_depth: bool = False):
    """Returns an (H, W, 3) uint8 image (optionally with the final depth buffer)."""
    H, W = camera.height, camera.width
    color = np.zeros((H, W, 3), dtype=np.float64)
    depth = np.full((H, W), np.inf)
    wpos = np.zeros((H, W, 3), dtype=np.float64)
    is_tissue = np.zeros((H, W), dtype=bool)

    def raster_quadmesh(grid_pts, base_color, flat_normal=None):
        """grid_pts: (m, n, 3) world vertices forming quads."""
        m, n, _ = grid_pts.shape
        pc = _project_many(camera, grid_pts.reshape(-1, 3)).reshape(m, n, 3)
        if np.any(pc[:, :, 2] <= 1e-9):
            return
        f = camera.focal
        uu = W / 2.0 + f * pc[:, :, 0] / pc[:, :, 2]
        vv = H / 2.0 + f * pc[:, :, 1] / pc[:, :, 2]
        for i in range(m - 1):
            for j in range(n - 1):
                quad_idx = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                wq = np.array([grid_pts[a] for a in quad_idx])
                if flat_normal is None:
                    nrm = np.cross(wq[1] - wq[0], wq[3] - wq[0])
                    nn = np.linalg.norm(nrm)
                    nrm = nrm / nn if nn > 0 else np.array([0, 0, 1.0])
                    if nrm[2] < 0:
                        nrm = -nrm
                else:
                    nrm = flat_normal
                shade = _shade(base_color, nrm, light)
                for tri in ((0, 1, 2), (0, 2, 3)):
                    vp = np.array([[uu[quad_idx[k]], vv[quad_idx[k]]] for k in tri])
                    dp = np.array([pc[quad_idx[k]][2] for k in tri])
                    wv = wq[list(tri)]
                    _raster_triangle(color, depth, wpos, vp, dp, wv, shade)

    # background tabletop
    bg = 0.5
    bg_pts = np.array([
        [[-bg, -bg, -0.002], [-bg, bg, -0.002]],
        [[bg, -bg, -0.002], [bg, bg, -0.002]],
    ])
    raster_quadmesh(bg_pts, scene.background_color, flat_normal=np.array([0, 0, 1.0]))

    # container walls
    a = scene.half_extent
    hwall = scene.wall_height
    for sgn, axis in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
        if axis == 0:
            corners = np.array([
                [[sgn * a, -a, 0.0], [sgn * a, a, 0.0]],
                [[sgn * a, -a, hwall], [sgn * a, a, hwall]],
            ])
            normal = np.array([float(-sgn), 0.0, 0.0])
        else:
            corners = np.array([
                [[-a, sgn * a, 0.0], [a, sgn * a, 0.0]],
                [[-a, sgn * a, hwall], [a, sgn * a, hwall]],
            ])
            normal = np.array([0.0, float(-sgn), 0.0])
        raster_quadmesh(corners, scene.container_color, flat_normal=normal)

    # tissue mesh
    hf = scene.heightfield
    depth_before_tissue = depth.copy()
    res = scene.mesh_resolution
    xs = np.linspace(-a, a, res)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    gz = hf.height_at(gx.ravel(), gy.ravel()).reshape(res, res)
    tissue_pts = np.stack([gx, gy, gz], axis=-1)
    raster_quadmesh(tissue_pts, scene.tissue_color)
    is_tissue = depth < depth_before_tissue

    # tool capsule as sphere impostors
    if scene.capsule is not None:
        cap = scene.capsule
        nseg = 24
        ts = np.linspace(0.0, 1.0, nseg)
        centers = cap.p0 + ts[:, None] * (cap.p1 - cap.p0)
        shaded = _shade(scene.tool_color, np.array([0, 0, 1.0]), light, ambient=0.55)
        pc = _project_many(camera, centers)
        f = camera.focal
        depth_before_tool = depth.copy()
        for k in range(nseg):
            z = pc[k, 2]
            if z <= 1e-9:
                continue
            u = W / 2.0 + f * pc[k, 0] / z
            v = H / 2.0 + f * pc[k, 1] / z
            r_px = max(f * cap.radius / z, 1.0)
            _splat_disc(color, depth, u, v, z, r_px, shaded)
        is_tissue &= depth == depth_before_tool  # tool overwrote those pixels

    # shadow: darken tissue pixels whose light ray hits the capsule
    if scene.capsule is not None and light.shadow_strength > 0:
        ty, tx = np.nonzero(is_tissue)
        if len(ty):
            origins = wpos[ty, tx]
            hit = _ray_hits_capsule(origins, -light.direction, scene.capsule)
            factor = 1.0 - light.shadow_strength
            color[ty[hit], tx[hit]] *= factor

    # pass 2: particle splats, unlit, nearest particle wins
    pts = scene.particle_positions
    if len(pts):
        pc = _project_many(camera, pts)
        f = camera.focal
        for k in range(len(pts)):
            z = pc[k, 2]
            if z <= 1e-9:
                continue
            u = W / 2.0 + f * pc[k, 0] / z
            v = H / 2.0 + f * pc[k, 1] / z
            r_px = max(f * scene.splat_radius / z, 1.0)
            _splat_disc(color, depth, u, v, z, r_px, scene.particle_colors[k])

    img = (np.clip(color, 0, 1) * 255.0 + 0.5).astype(np.uint8)
    return (img, depth) if return_depth else img


def _splat_disc(color_buf, depth_buf, u, v, z, r_px, color):
    H, W, _ = color_buf.shape
    x0 = max(int(np.floor(u - r_px - 0.5)), 0)
    x1 = min(int(np.ceil(u + r_px + 0.5)), W - 1)
    y0 = max(int(np.floor(v - r_px - 0.5)), 0)
    y1 = min(int(np.ceil(v + r_px + 0.5)), H - 1)
    if x1 < x0 or y1 < y0:
        return
    px, py = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)
    mask = (px - u) ** 2 + (py - v) ** 2 <= r_px * r_px
    if not mask.any():
        return
    sub_d = depth_buf[y0:y1 + 1, x0:x1 + 1]
    write = mask & (z < sub_d)
    sub_d[write] = z
    color_buf[y0:y1 + 1, x0:x1 + 1][write] = color


def save_png(image: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(image, mode="RGB").save(path)


def encode_png(image: np.ndarray) -> bytes:
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
