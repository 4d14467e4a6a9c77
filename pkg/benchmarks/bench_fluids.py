"""Benchmark the compiled fluid kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_fluids.py [--sizes 500,2000,8000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from simflow.fluids import FluidParams, SpatialHashGrid, backend_py

try:
    from simflow.fluids import _kernels as compiled
except ImportError:
    compiled = None


def bench(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3  # ms


def make_cloud(n, rng, params):
    # a settled-puddle-like slab, denser than rest so every kernel has work
    spacing = 0.85 * params.rest_spacing
    side = int(np.ceil((n / 4) ** 0.5))
    xs = np.arange(side) * spacing
    zs = np.arange(4) * spacing
    pts = np.stack(np.meshgrid(xs, xs, zs, indexing="ij"), -1).reshape(-1, 3)[:n]
    pts = pts + rng.normal(0, 0.0004, size=pts.shape)
    vel = rng.normal(0, 0.2, size=(n, 3))
    col = rng.uniform(0, 1, size=(n, 3))
    blo = rng.uniform(0, 1, size=n)
    return (np.ascontiguousarray(pts), np.ascontiguousarray(vel),
            np.ascontiguousarray(col), np.ascontiguousarray(blo))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="500,2000,8000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    params = FluidParams()
    h = params.kernel_radius
    rng = np.random.default_rng(0)
    backends = [("numpy", backend_py)]
    if compiled is not None:
        backends.append(("cython", compiled))
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    header = f"{'kernel':<14}{'n':>7}" + "".join(f"{name:>12}" for name, _ in backends)
    if compiled is not None:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        pos, vel, col, blo = make_cloud(n, rng, params)
        grid = SpatialHashGrid(pos, h)
        csr = {}
        rows = {}
        for name, mod in backends:
            csr[name] = mod.build_csr(pos, grid.sorted_keys, grid.order, grid.cell_size, h)
        cases = {
            "build_csr": lambda mod, name: mod.build_csr(
                pos, grid.sorted_keys, grid.order, grid.cell_size, h),
            "density_step": lambda mod, name: mod.density_step(
                pos, *csr[name], params.particle_mass, h, params.rest_density,
                params.relaxation_eps),
            "relax": lambda mod, name: mod.relax(
                pos, vel, *csr[name], params.particle_mass, params.rest_density, h,
                params.viscosity, params.cohesion, params.dt),
            "diffuse": lambda mod, name: mod.diffuse(
                pos, vel, col, blo, *csr[name], params.diffusion_sigma,
                params.diffusion_speed_coeff, params.diffusion_radius),
        }
        for kernel, call in cases.items():
            times = {}
            for name, mod in backends:
                times[name] = bench(lambda: call(mod, name), args.repeat)
            row = f"{kernel:<14}{n:>7}" + "".join(f"{times[name]:>11.2f}m" for name, _ in backends)
            if compiled is not None:
                row += f"{times['numpy'] / times['cython']:>9.1f}x"
            print(row)
        rows[n] = True
    print("\n(best of", args.repeat, "runs; times in ms)")


if __name__ == "__main__":
    main()
