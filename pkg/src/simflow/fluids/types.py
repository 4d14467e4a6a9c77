"""Particle state containers and solver parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SimulationDiverged(RuntimeError):
    """Raised when particle state turns non-finite; carries the physics step index."""

    def __init__(self, message: str, step_index: int = -1):
        super().__init__(message)
        self.step_index = step_index


@dataclass
class FluidParams:
    """Tunables of the position-based fluid step and the color diffusion pass.

    Units are SI (meters, seconds, kilograms). ``diffusion_sigma`` and
    ``diffusion_speed_coeff`` scale the neighbor weights
    exp(-d / (2 sigma^2)) * coeff * |v_j|; the self weight is fixed at 1.
    """

    dt: float = 0.02
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    kernel_radius: float = 0.01
    rest_density: float = 1000.0
    solver_iterations: int = 4
    cohesion: float = 0.02
    viscosity: float = 0.05
    diffusion_sigma: float = 0.03
    diffusion_speed_coeff: float = 0.5
    diffusion_radius: float = 0.01
    rest_spacing: float = 0.01 / 1.3
    relaxation_eps: float = 1e-5
    collision_tolerance: float = 1e-4
    max_speed: float = 1.0  # keeps per-step travel near the kernel radius

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=np.float64)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.kernel_radius <= 0:
            raise ValueError("kernel_radius must be positive")
        if self.solver_iterations < 1:
            raise ValueError("solver_iterations must be >= 1")
        if self.diffusion_sigma <= 0:
            raise ValueError("diffusion_sigma must be positive")
        if self.diffusion_speed_coeff < 0:
            raise ValueError("diffusion_speed_coeff must be >= 0")
        if self.diffusion_radius <= 0:
            raise ValueError("diffusion_radius must be positive")

    @property
    def particle_mass(self) -> float:
        return self.rest_density * self.rest_spacing**3


class ParticleSet:
    """Struct-of-arrays particle state.

    Dead (suctioned) particles keep their slot so indices stay stable within an
    episode; every solver pass and reduction skips them via ``alive``.
    """

    def __init__(
        self,
        positions: np.ndarray | None = None,
        velocities: np.ndarray | None = None,
        colors: np.ndarray | None = None,
        bloodness: np.ndarray | None = None,
    ):
        n = 0 if positions is None else len(positions)
        self.positions = _as_f64(positions, (n, 3))
        self.velocities = _as_f64(velocities, (n, 3))
        self.colors = _as_f64(colors, (n, 3))
        self.bloodness = _as_f64(bloodness, (n,))
        self.alive = np.ones(n, dtype=bool)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def live_count(self) -> int:
        return int(self.alive.sum())

    def live_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def add(
        self,
        positions: np.ndarray,
        velocities: np.ndarray,
        colors: np.ndarray,
        bloodness: np.ndarray,
    ) -> np.ndarray:
        """Append particles; returns the new indices."""
        k = len(positions)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        start = len(self.positions)
        self.positions = np.concatenate([self.positions, _as_f64(positions, (k, 3))])
        self.velocities = np.concatenate([self.velocities, _as_f64(velocities, (k, 3))])
        self.colors = np.concatenate([self.colors, _as_f64(colors, (k, 3))])
        self.bloodness = np.concatenate([self.bloodness, _as_f64(bloodness, (k,))])
        self.alive = np.concatenate([self.alive, np.ones(k, dtype=bool)])
        return np.arange(start, start + k, dtype=np.int64)

    def kill(self, indices: np.ndarray) -> None:
        self.alive[indices] = False

    def copy(self) -> "ParticleSet":
        out = ParticleSet(
            self.positions.copy(),
            self.velocities.copy(),
            self.colors.copy(),
            self.bloodness.copy(),
        )
        out.alive = self.alive.copy()
        return out

    def assert_finite(self, step_index: int = -1) -> None:
        live = self.alive
        if not (
            np.isfinite(self.positions[live]).all()
            and np.isfinite(self.velocities[live]).all()
        ):
            raise SimulationDiverged(
                f"non-finite particle state at step {step_index}", step_index
            )


def _as_f64(arr, shape) -> np.ndarray:
    if arr is None:
        return np.zeros(shape, dtype=np.float64)
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.shape != shape:
        out = out.reshape(shape)
    return out
