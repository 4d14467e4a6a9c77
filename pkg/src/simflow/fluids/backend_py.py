"""Pure-numpy fluid kernels (fallback when the compiled extension is absent).

Same call signatures as the Cython module ``_kernels``. All accumulations go
through np.bincount / np.ufunc.at, which reduce sequentially in pair order, so
results are deterministic run-to-run.
"""

from __future__ import annotations

import numpy as np

from .grid import _BITS, _OFF

_NEIGHBOR_OFFSETS = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)


def build_csr(positions, sorted_keys, order, cell_size, radius):
    """Neighbor lists (j != i, |p_i - p_j| <= radius) in CSR form.

    ``sorted_keys``/``order`` come from a SpatialHashGrid over ``positions``.
    Requires radius <= cell_size (the 27-cell stencil is exact then).
    """
    n = len(positions)
    if n == 0:
        return np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int64)
    cells = np.floor(positions / cell_size).astype(np.int64) + _OFF
    rows_chunks = []
    cols_chunks = []
    r2 = radius * radius
    for off in _NEIGHBOR_OFFSETS:
        c = cells + off
        keys = (c[:, 0] << (2 * _BITS)) | (c[:, 1] << _BITS) | c[:, 2]
        lo = np.searchsorted(sorted_keys, keys, side="left")
        hi = np.searchsorted(sorted_keys, keys, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        rows = np.repeat(np.arange(n, dtype=np.int64), counts)
        # ragged gather: for each row, consecutive slots lo[row]..hi[row)
        starts_rep = np.repeat(lo, counts)
        base = np.repeat(np.cumsum(counts) - counts, counts)
        cols = order[starts_rep + (np.arange(total, dtype=np.int64) - base)]
        d = positions[rows] - positions[cols]
        keep = (np.einsum("ij,ij->i", d, d) <= r2) & (rows != cols)
        rows_chunks.append(rows[keep])
        cols_chunks.append(cols[keep])
    if rows_chunks:
        rows = np.concatenate(rows_chunks)
        cols = np.concatenate(cols_chunks)
        sort = np.lexsort((cols, rows))
        rows, cols = rows[sort], cols[sort]
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
    starts = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=starts[1:])
    return starts, cols


def _pair_arrays(starts, cols):
    n = len(starts) - 1
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(starts))
    return rows, cols


def _poly6(r2, h):
    coef = 315.0 / (64.0 * np.pi * h**9)
    w = h * h - r2
    return np.where(r2 <= h * h, coef * w * w * w, 0.0)


def densities(pos, starts, cols, mass, h):
    n = len(pos)
    rows, cols = _pair_arrays(starts, cols)
    w0 = 315.0 / (64.0 * np.pi * h**9) * h**6
    rho = np.full(n, mass * w0)
    if len(rows):
        d = pos[rows] - pos[cols]
        r2 = np.einsum("ij,ij->i", d, d)
        rho += mass * np.bincount(rows, weights=_poly6(r2, h), minlength=n)
    return rho


def density_step(pos, starts, cols, mass, h, rho0, eps):
    """One PBF relaxation: returns (position corrections, max violation before)."""
    n = len(pos)
    rows, cols = _pair_arrays(starts, cols)
    if not len(rows):
        rho = densities(pos, starts, cols, mass, h)
        viol = float(np.max(rho / rho0 - 1.0, initial=0.0))
        return np.zeros((n, 3)), max(viol, 0.0)

    d = pos[rows] - pos[cols]
    r2 = np.einsum("ij,ij->i", d, d)
    r = np.sqrt(r2)
    rho = np.full(n, mass * 315.0 / (64.0 * np.pi * h**3))
    rho += mass * np.bincount(rows, weights=_poly6(r2, h), minlength=n)

    # spiky gradient of C_i wrt p_i contributions; coincident pairs get a
    # deterministic axis (spec: perturbed separation axis)
    tiny = r < 1e-9
    if tiny.any():
        d = d.copy()
        sign = np.where(rows[tiny] < cols[tiny], 1.0, -1.0)
        d[tiny] = np.stack([sign * 1e-9, np.zeros(sign.shape), np.zeros(sign.shape)], axis=1)
        r = np.where(tiny, 1e-9, r)
    spiky = -45.0 / (np.pi * h**6)
    mag = np.where(r <= h, spiky * (h - r) ** 2, 0.0) / r
    grad = d * mag[:, None] / rho0  # dC_i/dp_i per-pair contribution (negated for j)

    sum_g = np.zeros((n, 3))
    for k in range(3):
        sum_g[:, k] = np.bincount(rows, weights=grad[:, k], minlength=n)
    sum_g2 = np.bincount(rows, weights=np.einsum("ij,ij->i", grad, grad), minlength=n)
    denom = np.einsum("ij,ij->i", sum_g, sum_g) + sum_g2 + eps

    c_viol = np.maximum(rho / rho0 - 1.0, 0.0)  # one-sided constraint
    lam = -c_viol / denom
    pair_scale = lam[rows] + lam[cols]
    delta = np.zeros((n, 3))
    for k in range(3):
        delta[:, k] = np.bincount(rows, weights=pair_scale * grad[:, k], minlength=n)
    return delta, float(c_viol.max(initial=0.0))


def relax(pos, vel, starts, cols, mass, rho0, h, viscosity, cohesion, dt):
    """XSPH viscosity + pairwise cohesion, returned as a position delta."""
    n = len(pos)
    rows, cols = _pair_arrays(starts, cols)
    dp = np.zeros((n, 3))
    if not len(rows):
        return dp
    d = pos[cols] - pos[rows]
    r2 = np.einsum("ij,ij->i", d, d)
    wn = (mass / rho0) * _poly6(r2, h)
    dv = vel[cols] - vel[rows]
    contrib = (dt * viscosity) * dv * wn[:, None] + cohesion * d * wn[:, None]
    for k in range(3):
        dp[:, k] = np.bincount(rows, weights=contrib[:, k], minlength=n)
    return dp


def diffuse(pos, vel, colors, blood, starts, cols, sigma, speed_coeff, radius):
    """Velocity-weighted Gaussian color/label mixing.

    Difference form around the self value (weight 1) keeps the identical-color
    fixed point exact; the result is clamped to the contributing-value envelope
    so convexity survives rounding.
    """
    n = len(pos)
    rows, cols = _pair_arrays(starts, cols)
    new_colors = colors.copy()
    new_blood = blood.copy()
    if not len(rows):
        return new_colors, new_blood
    d = pos[rows] - pos[cols]
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    speed = np.sqrt(np.einsum("ij,ij->i", vel[cols], vel[cols]))
    w = np.exp(-r / (2.0 * sigma * sigma)) * speed_coeff * speed
    w = np.where(r <= radius, w, 0.0)

    wsum = 1.0 + np.bincount(rows, weights=w, minlength=n)
    cmin = colors.copy()
    cmax = colors.copy()
    bmin = blood.copy()
    bmax = blood.copy()
    active = w > 0.0
    ar, ac = rows[active], cols[active]
    np.minimum.at(cmin, ar, colors[ac])
    np.maximum.at(cmax, ar, colors[ac])
    np.minimum.at(bmin, ar, blood[ac])
    np.maximum.at(bmax, ar, blood[ac])

    for k in range(3):
        num = np.bincount(rows, weights=w * (colors[cols, k] - colors[rows, k]), minlength=n)
        new_colors[:, k] = np.clip(colors[:, k] + num / wsum, cmin[:, k], cmax[:, k])
    numb = np.bincount(rows, weights=w * (blood[cols] - blood[rows]), minlength=n)
    new_blood = np.clip(blood + numb / wsum, bmin, bmax)
    return new_colors, new_blood
