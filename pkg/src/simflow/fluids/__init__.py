"""Position-based fluid solver with color/contamination diffusion.

The hot kernels live in a compiled extension (``_kernels``); a pure-numpy
twin (``backend_py``) is used when the extension is unavailable or when
``SIMFLOW_FLUID_BACKEND=python`` is set. Both produce results that agree to
float tolerance; each is bit-deterministic on its own.
"""

import os as _os

from .grid import SpatialHashGrid, build_hash_grid
from .types import FluidParams, ParticleSet, SimulationDiverged

_requested = _os.environ.get("SIMFLOW_FLUID_BACKEND", "auto").lower()

if _requested == "python":
    from . import backend_py as kernels

    BACKEND = "python"
elif _requested in ("auto", "cython"):
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import backend_py as kernels  # type: ignore[no-redef]

        BACKEND = "python"
else:
    raise RuntimeError(f"unknown SIMFLOW_FLUID_BACKEND={_requested!r}")

from .solver import (  # noqa: E402  (needs kernels bound first)
    PredictedState,
    diffuse_colors,
    predict_positions,
    solve_constraints,
    step_fluid,
)

__all__ = [
    "BACKEND",
    "FluidParams",
    "ParticleSet",
    "PredictedState",
    "SimulationDiverged",
    "SpatialHashGrid",
    "build_hash_grid",
    "diffuse_colors",
    "kernels",
    "predict_positions",
    "solve_constraints",
    "step_fluid",
]
