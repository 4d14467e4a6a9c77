"""Run configuration: reward weights, environment, randomization, curriculum,
and training hyperparameters, externalized to one YAML file.

Defaults reproduce the published weight/hyperparameter tables exactly; the
config digest covers every reward/env field so demos and checkpoints can be
checked against the environment that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, is_dataclass

import yaml


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems


# ----------------------------------------------------------------- rewards

@dataclass
class RewardConfig:
    # irrigation task
    irrigation_affected: float = 0.2
    irrigation_completion: float = 5.0
    irrigation_approach: float = 10.0
    irrigation_toggle_match: float = 0.02
    irrigation_toggle_mismatch: float = -0.05
    irrigation_orientation: float = -0.00005
    irrigation_contact: float = -0.001
    # suction task
    suction_removed: float = 0.03
    suction_completion: float = 5.0
    suction_approach: float = 5.0
    suction_orientation: float = -0.0001
    suction_contact: float = -0.03
    # feature conventions: distances in meters (xy-plane), orientation in
    # degrees of tool tilt from vertical, counts as raw particle counts
    proximity_threshold: float = 0.015


# ----------------------------------------------------------------- fluids

@dataclass
class FluidConfig:
    dt: float = 0.02
    gravity: float = -9.81
    kernel_radius: float = 0.01
    rest_density: float = 1000.0
    solver_iterations: int = 4
    cohesion: float = 0.02
    viscosity: float = 0.05
    diffusion_sigma: float = 0.03
    diffusion_speed_coeff: float = 0.5
    diffusion_radius: float = 0.01

    def to_params(self, cohesion=None, viscosity=None):
        from .fluids import FluidParams

        return FluidParams(
            dt=self.dt,
            gravity=(0.0, 0.0, self.gravity),
            kernel_radius=self.kernel_radius,
            rest_density=self.rest_density,
            solver_iterations=self.solver_iterations,
            cohesion=self.cohesion if cohesion is None else cohesion,
            viscosity=self.viscosity if viscosity is None else viscosity,
            diffusion_sigma=self.diffusion_sigma,
            diffusion_speed_coeff=self.diffusion_speed_coeff,
            diffusion_radius=self.diffusion_radius,
        )


# ----------------------------------------------------------------- scene bits

@dataclass
class TissueCfg:
    half_extent: float = 0.075
    rim_height: float = 0.005
    height_min: float = 0.005
    height_max: float = 0.03
    resolution: int = 64


@dataclass
class EmitterCfg:
    spawn_rate: int = 2
    spawn_speed: float = 0.5
    jitter: float = 0.002


@dataclass
class SuctionCfg:
    half_angle_deg: float = 30.0
    strength: float = 60.0
    cone_height: float = 0.05
    entrainment: float = 6.0
    removal_radius: float = 0.02


# ----------------------------------------------------------------- env

@dataclass
class EnvConfig:
    dt: float = 0.02
    decision_interval: int = 5  # physics steps per decision -> 10 Hz
    max_steps_irrigation: int = 1000  # physics steps
    max_steps_suction: int = 2000
    settle_steps: int = 50
    frame_stack: int = 4
    obs_mode: str = "vision"  # vision | vector
    image_width: int = 84
    image_height: int = 84
    render_mesh_resolution: int = 20
    # completion
    theta_affect: float = 0.8
    phi_complete: float = 0.9
    k_remaining: int = 0
    # per-decision action scales
    action_scale_rad: float = 0.0174533  # 1 degree
    action_scale_m: float = 0.002
    # geometry
    tool_radius: float = 0.003
    tool_length: float = 0.09  # rendered/collision capsule length up the shaft
    wall_height: float = 0.015
    hover_height: float = 0.02
    fluid: FluidConfig = field(default_factory=FluidConfig)
    tissue: TissueCfg = field(default_factory=TissueCfg)
    emitter: EmitterCfg = field(default_factory=EmitterCfg)
    suction: SuctionCfg = field(default_factory=SuctionCfg)


# ----------------------------------------------------------------- DR

@dataclass
class ColorSpec:
    rgb: tuple[float, float, float]
    hsv_delta: tuple[float, float, float] = (0.03, 0.1, 0.1)


@dataclass
class DRConfig:
    tissue: ColorSpec = field(default_factory=lambda: ColorSpec((0.82, 0.62, 0.55)))
    tool: ColorSpec = field(default_factory=lambda: ColorSpec((0.70, 0.70, 0.75)))
    background: ColorSpec = field(default_factory=lambda: ColorSpec((0.45, 0.45, 0.48)))
    container: ColorSpec = field(default_factory=lambda: ColorSpec((0.55, 0.55, 0.58)))
    blood: ColorSpec = field(default_factory=lambda: ColorSpec((0.35, 0.05, 0.05)))
    irrigation_fluid: ColorSpec = field(default_factory=lambda: ColorSpec((0.85, 0.30, 0.30)))
    # camera: base look-at plus uniform offsets
    camera_eye: tuple[float, float, float] = (0.0, -0.20, 0.19)
    camera_target: tuple[float, float, float] = (0.0, 0.0, 0.01)
    camera_eye_delta: float = 0.015
    camera_target_delta: float = 0.008
    camera_fov_deg: float = 45.0
    # light
    light_direction: tuple[float, float, float] = (0.3, -0.25, -1.0)
    light_direction_delta: float = 0.15
    light_intensity: tuple[float, float] = (0.8, 1.2)
    shadow_strength: tuple[float, float] = (0.2, 0.6)
    # task amounts
    blood_particles: tuple[int, int] = (90, 150)  # irrigation single block
    suction_blocks: tuple[int, int] = (1, 3)
    suction_block_particles: tuple[int, int] = (120, 240)
    spawn_jitter: float = 0.002
    drop_height: float = 0.015  # above local tissue
    # physics
    cohesion: tuple[float, float] = (0.01, 0.05)
    viscosity: tuple[float, float] = (0.02, 0.10)
    # initial joints (low, high) per joint
    init_joint_low: tuple[float, ...] = (-1.6, -0.22, 0.08, -0.5, -0.15)
    init_joint_high: tuple[float, ...] = (1.6, 0.22, 0.13, 0.5, 0.15)


# ----------------------------------------------------------------- curriculum

@dataclass
class CurriculumConfig:
    enabled: bool = False
    # (global env step threshold, probability of sampling the full task)
    lessons: tuple[tuple[int, float], ...] = (
        (0, 0.0),
        (50_000, 0.25),
        (100_000, 0.5),
        (150_000, 0.75),
        (200_000, 1.0),
    )


# ----------------------------------------------------------------- training

@dataclass
class TrainConfig:
    rollout_buffer_size: int = 32768
    batch_size: int = 2048
    learning_rate: float = 3e-4  # linear decay to 0
    entropy_beta: float = 1e-2
    clip_epsilon: float = 0.2  # linear decay to 0
    gae_lambda: float = 0.95
    epochs_per_update: int = 3
    mlp_layers: int = 3
    mlp_hidden: int = 128
    conv_channels: tuple[int, int] = (16, 32)  # "simple" 2-layer encoder
    gamma: float = 0.99
    total_steps: int = 200_000  # decision steps across all envs
    n_envs: int = 8
    # imitation
    bc_strength: float = 0.2  # linear decay
    bc_steps: int = 10_000
    bc_batch_size: int = 256
    gail_reward_strength: float = 5e-2
    gail_batch_size: int = 256
    log_std_init: float = -0.5
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    seed: int = 0


@dataclass
class PathsConfig:
    demos: str = "demos"
    checkpoints: str = "checkpoints"
    metrics: str = "metrics.csv"


# ----------------------------------------------------------------- run config

@dataclass
class RunConfig:
    task: str = "suction"  # irrigation | suction
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    dr: DRConfig = field(default_factory=DRConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    chain: dict | None = None  # optional kinematic chain override

    def digest(self) -> str:
        """Stable hash over every reward/env field (the contract demos and
        checkpoints are validated against)."""
        payload = {
            "task": self.task,
            "env": dataclasses.asdict(self.env),
            "reward": dataclasses.asdict(self.reward),
            "chain": self.chain,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"),
                          default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def build_chain(self):
        from .kinematics import chain_from_config, default_chain

        return default_chain() if self.chain is None else chain_from_config(self.chain)


def _json_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


# ----------------------------------------------------------------- (de)serialization

def _from_dict(cls, data, path, problems):
    if not isinstance(data, dict):
        problems.append(f"{path or cls.__name__}: expected mapping, got {type(data).__name__}")
        return cls()
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            problems.append(f"{path}{key}: unknown key")
    kwargs = {}
    for name in known:
        if name not in data:
            continue
        value = data[name]
        sub = f"{path}{name}."
        ftype = _FIELD_TYPES.get((cls.__name__, name))
        if ftype is not None and value is not None:
            kwargs[name] = _from_dict(ftype, value, sub, problems)
        else:
            kwargs[name] = _coerce(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{path or cls.__name__}: {exc}")
        return cls()


def _coerce(value):
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value


_FIELD_TYPES = {
    ("RunConfig", "env"): EnvConfig,
    ("RunConfig", "reward"): RewardConfig,
    ("RunConfig", "dr"): DRConfig,
    ("RunConfig", "curriculum"): CurriculumConfig,
    ("RunConfig", "train"): TrainConfig,
    ("RunConfig", "paths"): PathsConfig,
    ("EnvConfig", "fluid"): FluidConfig,
    ("EnvConfig", "tissue"): TissueCfg,
    ("EnvConfig", "emitter"): EmitterCfg,
    ("EnvConfig", "suction"): SuctionCfg,
    ("DRConfig", "tissue"): ColorSpec,
    ("DRConfig", "tool"): ColorSpec,
    ("DRConfig", "background"): ColorSpec,
    ("DRConfig", "container"): ColorSpec,
    ("DRConfig", "blood"): ColorSpec,
    ("DRConfig", "irrigation_fluid"): ColorSpec,
}


def validate(cfg: RunConfig) -> list[str]:
    problems = []
    if cfg.task not in ("irrigation", "suction"):
        problems.append(f"task: must be irrigation or suction, got {cfg.task!r}")
    env = cfg.env
    if env.dt <= 0:
        problems.append("env.dt: must be positive")
    if env.decision_interval < 1:
        problems.append("env.decision_interval: must be >= 1")
    if abs(env.dt * env.decision_interval - 0.1) > 1e-9:
        problems.append("env: decision_interval * dt must equal 0.1 s (10 Hz decisions)")
    if env.obs_mode not in ("vision", "vector"):
        problems.append(f"env.obs_mode: must be vision or vector, got {env.obs_mode!r}")
    if env.image_width < 8 or env.image_height < 8:
        problems.append("env.image size: must be at least 8x8")
    if not 0 < env.theta_affect <= 1:
        problems.append("env.theta_affect: must be in (0, 1]")
    if not 0 < env.phi_complete <= 1:
        problems.append("env.phi_complete: must be in (0, 1]")
    if env.fluid.dt != env.dt:
        problems.append("env.fluid.dt: must equal env.dt")
    if env.fluid.kernel_radius <= 0:
        problems.append("env.fluid.kernel_radius: must be positive")
    if env.fluid.solver_iterations < 1:
        problems.append("env.fluid.solver_iterations: must be >= 1")
    if env.fluid.diffusion_sigma <= 0:
        problems.append("env.fluid.diffusion_sigma: must be positive")
    tr = cfg.train
    if tr.clip_epsilon <= 0:
        problems.append("train.clip_epsilon: must be positive")
    if tr.learning_rate <= 0:
        problems.append("train.learning_rate: must be positive")
    if tr.batch_size < 1 or tr.rollout_buffer_size < tr.batch_size:
        problems.append("train: rollout_buffer_size must be >= batch_size >= 1")
    if not 0 <= tr.gae_lambda <= 1:
        problems.append("train.gae_lambda: must be in [0, 1]")
    if not 0 < tr.gamma <= 1:
        problems.append("train.gamma: must be in (0, 1]")
    lessons = cfg.curriculum.lessons
    if lessons:
        steps = [s for s, _ in lessons]
        ps = [p for _, p in lessons]
        if steps != sorted(steps) or len(set(steps)) != len(steps):
            problems.append("curriculum.lessons: thresholds must be strictly increasing")
        if ps != sorted(ps):
            problems.append("curriculum.lessons: probabilities must be non-decreasing")
        if any(not 0 <= p <= 1 for p in ps):
            problems.append("curriculum.lessons: probabilities must be in [0, 1]")
    lo, hi = cfg.dr.init_joint_low, cfg.dr.init_joint_high
    if len(lo) != 5 or len(hi) != 5 or any(a > b for a, b in zip(lo, hi)):
        problems.append("dr.init_joint ranges: need 5 joints with low <= high")
    return problems


def load_config(path) -> RunConfig:
    """Parse + validate a YAML config file; empty file -> all defaults."""
    with open(path) as f:
        data = yaml.safe_load(f)
    return config_from_dict(data or {})


def config_from_dict(data: dict) -> RunConfig:
    problems: list[str] = []
    cfg = _from_dict(RunConfig, data, "", problems)
    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(_tuples_to_lists(config_to_dict(cfg)), f, sort_keys=False)


def _tuples_to_lists(obj):
    if isinstance(obj, dict):
        return {k: _tuples_to_lists(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return [_tuples_to_lists(v) for v in obj]
    if isinstance(obj, list):
        return [_tuples_to_lists(v) for v in obj]
    return obj
