"""Per-episode domain randomization: visuals (HSV color shifts, camera and
light pose), task layout (tissue shape, fluid amounts and drop sites, initial
joints), and fluid physics (cohesion/viscosity)."""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from ..config import DRConfig, EnvConfig
from ..kinematics import KinematicChain, forward_kinematics
from ..render import Camera, DirectionalLight, look_at
from ..scene import BezierSurface, TissueConfig, TissueHeightfield, generate_tissue


@dataclass
class SampledWorld:
    colors: dict[str, np.ndarray]
    camera: Camera
    light: DirectionalLight
    cohesion: float
    viscosity: float
    init_q: np.ndarray
    surface: BezierSurface
    heightfield: TissueHeightfield
    spawn_blocks: list[tuple[np.ndarray, int]]  # (center, particle count)
    spawn_jitter: float


def shift_hsv(rgb, delta, rng: np.random.Generator) -> np.ndarray:
    h, s, v = colorsys.rgb_to_hsv(*rgb)
    h = (h + delta[0] * rng.uniform(-1, 1)) % 1.0
    s = float(np.clip(s + delta[1] * rng.uniform(-1, 1), 0, 1))
    v = float(np.clip(v + delta[2] * rng.uniform(-1, 1), 0, 1))
    return np.array(colorsys.hsv_to_rgb(h, s, v))


def sample_init_joints(dr: DRConfig, chain: KinematicChain,
                       heightfield: TissueHeightfield, half_extent: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Joints uniform in the configured ranges, rejected until the tip sits
    above the container interior and clear of the tissue."""
    lo = np.asarray(dr.init_joint_low)
    hi = np.asarray(dr.init_joint_high)
    h_max = heightfield.max_height()
    fallback = np.array([0.0, 0.0, 0.10, 0.0, 0.0])
    for _ in range(100):
        q = chain.clamp(rng.uniform(lo, hi))
        tip = forward_kinematics(chain, q).position
        if (
            abs(tip[0]) <= half_extent - 0.01
            and abs(tip[1]) <= half_extent - 0.01
            and h_max + 0.01 <= tip[2] <= 0.13
        ):
            return q
    return chain.clamp(fallback)


def sample_world(task: str, env_cfg: EnvConfig, dr: DRConfig,
                 chain: KinematicChain, rng: np.random.Generator) -> SampledWorld:
    colors = {
        name: shift_hsv(spec.rgb, spec.hsv_delta, rng)
        for name, spec in (
            ("tissue", dr.tissue),
            ("tool", dr.tool),
            ("background", dr.background),
            ("container", dr.container),
            ("blood", dr.blood),
            ("irrigation", dr.irrigation_fluid),
        )
    }

    eye = np.asarray(dr.camera_eye) + dr.camera_eye_delta * rng.uniform(-1, 1, 3)
    target = np.asarray(dr.camera_target) + dr.camera_target_delta * rng.uniform(-1, 1, 3)
    camera = Camera(look_at(eye, target), fov_y=np.deg2rad(dr.camera_fov_deg),
                    width=env_cfg.image_width, height=env_cfg.image_height)

    ldir = np.asarray(dr.light_direction) + dr.light_direction_delta * rng.uniform(-1, 1, 3)
    if ldir[2] > -0.2:
        ldir[2] = -0.2  # keep the light overhead
    light = DirectionalLight(
        direction=ldir / np.linalg.norm(ldir),
        intensity=float(rng.uniform(*dr.light_intensity)),
        shadow_strength=float(rng.uniform(*dr.shadow_strength)),
    )

    cohesion = float(rng.uniform(*dr.cohesion))
    viscosity = float(rng.uniform(*dr.viscosity))

    tcfg = TissueConfig(
        half_extent=env_cfg.tissue.half_extent,
        rim_height=env_cfg.tissue.rim_height,
        height_band=(env_cfg.tissue.height_min, env_cfg.tissue.height_max),
        resolution=env_cfg.tissue.resolution,
    )
    surface, heightfield = generate_tissue(rng, tcfg)

    blocks = []
    n_blocks = 1 if task == "irrigation" else int(rng.integers(dr.suction_blocks[0],
                                                               dr.suction_blocks[1] + 1))
    count_range = dr.blood_particles if task == "irrigation" else dr.suction_block_particles
    a = env_cfg.tissue.half_extent
    for _ in range(n_blocks):
        count = int(rng.integers(count_range[0], count_range[1] + 1))
        x, y = rng.uniform(-(a - 0.025), a - 0.025, size=2)
        z = float(heightfield.height_at(np.array(x), np.array(y))) + dr.drop_height
        blocks.append((np.array([x, y, z]), count))

    init_q = sample_init_joints(dr, chain, heightfield, a, rng)

    return SampledWorld(
        colors=colors,
        camera=camera,
        light=light,
        cohesion=cohesion,
        viscosity=viscosity,
        init_q=init_q,
        surface=surface,
        heightfield=heightfield,
        spawn_blocks=blocks,
        spawn_jitter=dr.spawn_jitter,
    )
