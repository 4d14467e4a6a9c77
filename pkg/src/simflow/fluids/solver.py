"""Fluid step pipeline: predict, constraint solve, velocity finalize, diffusion.

Works on the live-particle subset of a ParticleSet; dead slots are untouched.
External force fields contribute accelerations in the predict stage; colliders
project positions after each constraint iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import SpatialHashGrid
from .types import FluidParams, ParticleSet, SimulationDiverged


@dataclass
class PredictedState:
    """Transient solver state: original positions plus predicted ones."""

    original: np.ndarray  # (n, 3) positions at step start
    positions: np.ndarray  # (n, 3) predicted
    velocities: np.ndarray  # (n, 3) post external-force kick


def predict_positions(
    positions: np.ndarray,
    velocities: np.ndarray,
    params: FluidParams,
    accel: np.ndarray | None = None,
) -> PredictedState:
    """v' = v + dt * f_ext(x), p = x + dt * v'."""
    if not (np.isfinite(positions).all() and np.isfinite(velocities).all()):
        raise SimulationDiverged("non-finite state entering predict")
    total = params.gravity if accel is None else params.gravity + accel
    v = velocities + params.dt * total
    p = positions + params.dt * v
    return PredictedState(original=positions.copy(), positions=p, velocities=v)


def solve_constraints(
    predicted: PredictedState,
    grid: SpatialHashGrid,
    params: FluidParams,
    colliders=None,
) -> PredictedState:
    """Iterative density relaxation + collision projection, then XSPH/cohesion."""
    pos = predicted.positions
    h = params.kernel_radius
    starts, cols = kernels.build_csr(pos, grid.sorted_keys, grid.order, grid.cell_size, h)
    for _ in range(params.solver_iterations):
        delta, _ = kernels.density_step(
            pos, starts, cols, params.particle_mass, h,
            params.rest_density, params.relaxation_eps,
        )
        pos = pos + delta
        if colliders is not None:
            pos = colliders.project(pos, params.collision_tolerance)
    if params.viscosity != 0.0 or params.cohesion != 0.0:
        dp = kernels.relax(
            pos, predicted.velocities, starts, cols, params.particle_mass,
            params.rest_density, h, params.viscosity, params.cohesion, params.dt,
        )
        pos = pos + dp
        if colliders is not None:
            pos = colliders.project(pos, params.collision_tolerance)
    predicted.positions = pos
    return predicted


def diffuse_colors(
    particles: ParticleSet,
    grid: SpatialHashGrid,
    params: FluidParams,
) -> ParticleSet:
    """Neighbor-weighted color and bloodness mixing over live particles.

    ``grid`` must have been built over the live particles' current positions.
    """
    idx = particles.live_indices()
    if len(idx) == 0:
        return particles
    diffuse_colors_subset(particles, idx, grid, params)
    return particles


def step_fluid(
    state: ParticleSet,
    params: FluidParams,
    colliders=None,
    external_fields=(),
    step_index: int = -1,
) -> ParticleSet:
    """One full physics step; mutates and returns ``state``."""
    idx = state.live_indices()
    if len(idx) == 0:
        return state
    pos = np.ascontiguousarray(state.positions[idx])
    vel = np.ascontiguousarray(state.velocities[idx])

    accel = None
    for field in external_fields:
        try:
            a = field.accel(pos, vel)
        except TypeError:
            a = field.accel(pos)
        accel = a if accel is None else accel + a

    try:
        predicted = predict_positions(pos, vel, params, accel)
    except SimulationDiverged as exc:
        raise SimulationDiverged(str(exc), step_index) from None

    cell = max(params.kernel_radius, params.diffusion_radius)
    grid = SpatialHashGrid(predicted.positions, cell)
    solve_constraints(predicted, grid, params, colliders)

    new_vel = (predicted.positions - predicted.original) / params.dt
    if params.max_speed > 0:
        speed = np.linalg.norm(new_vel, axis=1)
        fast = speed > params.max_speed
        if fast.any():
            new_vel[fast] *= (params.max_speed / speed[fast])[:, None]
    state.positions[idx] = predicted.positions
    state.velocities[idx] = new_vel

    diff_grid = SpatialHashGrid(np.ascontiguousarray(state.positions[idx]), cell)
    diffuse_colors_subset(state, idx, diff_grid, params)

    state.assert_finite(step_index)
    return state


def diffuse_colors_subset(
    particles: ParticleSet, idx: np.ndarray, grid: SpatialHashGrid, params: FluidParams
) -> None:
    pos = np.ascontiguousarray(particles.positions[idx])
    vel = np.ascontiguousarray(particles.velocities[idx])
    col = np.ascontiguousarray(particles.colors[idx])
    blo = np.ascontiguousarray(particles.bloodness[idx])
    starts, cols = kernels.build_csr(
        pos, grid.sorted_keys, grid.order, grid.cell_size, params.diffusion_radius
    )
    new_col, new_blo = kernels.diffuse(
        pos, vel, col, blo, starts, cols,
        params.diffusion_sigma, params.diffusion_speed_coeff, params.diffusion_radius,
    )
    particles.colors[idx] = new_col
    particles.bloodness[idx] = new_blo
