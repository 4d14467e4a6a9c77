# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fluid kernels: neighbor CSR build, PBF density relaxation,
XSPH/cohesion, and color diffusion. Mirrors backend_py's signatures."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef long BITS = 21
cdef long OFF = 1 << (BITS - 1)
cdef double PI = 3.14159265358979323846


cdef inline long _lower_bound(const long* keys, long n, long key) nogil:
    cdef long lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline long _upper_bound(const long* keys, long n, long key) nogil:
    cdef long lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] <= key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline long _floordiv_cell(double x, double cell_size) nogil:
    # same IEEE op sequence as np.floor(x / cell_size) in the grid builder
    cdef double q = x / cell_size
    cdef long c = <long>q
    if q < 0 and q != c:
        c -= 1
    return c


def build_csr(double[:, ::1] positions, long[::1] sorted_keys, long[::1] order,
              double cell_size, double radius):
    cdef long n = positions.shape[0]
    starts_np = np.zeros(n + 1, dtype=np.int64)
    cdef long[::1] starts = starts_np
    if n == 0:
        return starts_np, np.empty(0, dtype=np.int64)

    cdef double r2 = radius * radius
    cdef const long* keys_ptr = &sorted_keys[0]
    cdef long i, j, k, dx, dy, dz, cx, cy, cz, lo, hi, base_count, total
    cdef long key
    cdef double px, py, pz, ddx, ddy, ddz

    # pass 1: counts
    for i in range(n):
        px = positions[i, 0]; py = positions[i, 1]; pz = positions[i, 2]
        cx = _floordiv_cell(px, cell_size)
        cy = _floordiv_cell(py, cell_size)
        cz = _floordiv_cell(pz, cell_size)
        base_count = 0
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    key = ((cx + dx + OFF) << (2 * BITS)) | ((cy + dy + OFF) << BITS) | (cz + dz + OFF)
                    lo = _lower_bound(keys_ptr, n, key)
                    hi = _upper_bound(keys_ptr, n, key)
                    for k in range(lo, hi):
                        j = order[k]
                        if j == i:
                            continue
                        ddx = px - positions[j, 0]
                        ddy = py - positions[j, 1]
                        ddz = pz - positions[j, 2]
                        if ddx * ddx + ddy * ddy + ddz * ddz <= r2:
                            base_count += 1
        starts[i + 1] = base_count

    total = 0
    for i in range(n):
        total += starts[i + 1]
        starts[i + 1] = total

    cols_np = np.empty(total, dtype=np.int64)
    cdef long[::1] cols = cols_np
    cdef long fill

    # pass 2: fill
    for i in range(n):
        px = positions[i, 0]; py = positions[i, 1]; pz = positions[i, 2]
        cx = _floordiv_cell(px, cell_size)
        cy = _floordiv_cell(py, cell_size)
        cz = _floordiv_cell(pz, cell_size)
        fill = starts[i]
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    key = ((cx + dx + OFF) << (2 * BITS)) | ((cy + dy + OFF) << BITS) | (cz + dz + OFF)
                    lo = _lower_bound(keys_ptr, n, key)
                    hi = _upper_bound(keys_ptr, n, key)
                    for k in range(lo, hi):
                        j = order[k]
                        if j == i:
                            continue
                        ddx = px - positions[j, 0]
                        ddy = py - positions[j, 1]
                        ddz = pz - positions[j, 2]
                        if ddx * ddx + ddy * ddy + ddz * ddz <= r2:
                            cols[fill] = j
                            fill += 1
    return starts_np, cols_np


def densities(double[:, ::1] pos, long[::1] starts, long[::1] cols,
              double mass, double h):
    cdef long n = pos.shape[0]
    rho_np = np.empty(n, dtype=np.float64)
    cdef double[::1] rho = rho_np
    cdef double coef = 315.0 / (64.0 * PI * h ** 9)
    cdef double h2 = h * h
    cdef double w0 = coef * h2 * h2 * h2
    cdef long i, k, j
    cdef double acc, ddx, ddy, ddz, r2, t
    for i in range(n):
        acc = mass * w0
        for k in range(starts[i], starts[i + 1]):
            j = cols[k]
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            ddz = pos[i, 2] - pos[j, 2]
            r2 = ddx * ddx + ddy * ddy + ddz * ddz
            if r2 <= h2:
                t = h2 - r2
                acc += mass * coef * t * t * t
        rho[i] = acc
    return rho_np


def density_step(double[:, ::1] pos, long[::1] starts, long[::1] cols,
                 double mass, double h, double rho0, double eps):
    cdef long n = pos.shape[0]
    delta_np = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] delta = delta_np
    if n == 0:
        return delta_np, 0.0

    cdef double coef = 315.0 / (64.0 * PI * h ** 9)
    cdef double spiky = -45.0 / (PI * h ** 6)
    cdef double h2 = h * h
    cdef double w0 = coef * h2 * h2 * h2

    lam_np = np.empty(n, dtype=np.float64)
    cdef double[::1] lam = lam_np
    cdef double max_viol = 0.0
    cdef long i, k, j
    cdef double rho, ddx, ddy, ddz, r2, r, t, gx, gy, gz, mag
    cdef double sgx, sgy, sgz, sg2, denom, c_i, sign

    for i in range(n):
        rho = mass * w0
        sgx = 0.0; sgy = 0.0; sgz = 0.0; sg2 = 0.0
        for k in range(starts[i], starts[i + 1]):
            j = cols[k]
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            ddz = pos[i, 2] - pos[j, 2]
            r2 = ddx * ddx + ddy * ddy + ddz * ddz
            if r2 > h2:
                continue
            t = h2 - r2
            rho += mass * coef * t * t * t
            r = sqrt(r2)
            if r < 1e-9:
                sign = 1.0 if i < j else -1.0
                ddx = sign * 1e-9; ddy = 0.0; ddz = 0.0
                r = 1e-9
            mag = spiky * (h - r) * (h - r) / r / rho0
            gx = ddx * mag; gy = ddy * mag; gz = ddz * mag
            sgx += gx; sgy += gy; sgz += gz
            sg2 += gx * gx + gy * gy + gz * gz
        denom = sgx * sgx + sgy * sgy + sgz * sgz + sg2 + eps
        c_i = rho / rho0 - 1.0
        if c_i < 0.0:
            c_i = 0.0
        if c_i > max_viol:
            max_viol = c_i
        lam[i] = -c_i / denom

    for i in range(n):
        for k in range(starts[i], starts[i + 1]):
            j = cols[k]
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            ddz = pos[i, 2] - pos[j, 2]
            r2 = ddx * ddx + ddy * ddy + ddz * ddz
            if r2 > h2:
                continue
            r = sqrt(r2)
            if r < 1e-9:
                sign = 1.0 if i < j else -1.0
                ddx = sign * 1e-9; ddy = 0.0; ddz = 0.0
                r = 1e-9
            mag = spiky * (h - r) * (h - r) / r / rho0
            t = lam[i] + lam[j]
            delta[i, 0] += t * ddx * mag
            delta[i, 1] += t * ddy * mag
            delta[i, 2] += t * ddz * mag
    return delta_np, max_viol


def relax(double[:, ::1] pos, double[:, ::1] vel, long[::1] starts, long[::1] cols,
          double mass, double rho0, double h, double viscosity, double cohesion,
          double dt):
    cdef long n = pos.shape[0]
    dp_np = np.zeros((n, 3), dtype=np.float64)
    cdef double[:, ::1] dp = dp_np
    cdef double coef = 315.0 / (64.0 * PI * h ** 9)
    cdef double h2 = h * h
    cdef double m_over_rho = mass / rho0
    cdef long i, k, j
    cdef double ddx, ddy, ddz, r2, t, wn, vx, vy, vz
    for i in range(n):
        for k in range(starts[i], starts[i + 1]):
            j = cols[k]
            ddx = pos[j, 0] - pos[i, 0]
            ddy = pos[j, 1] - pos[i, 1]
            ddz = pos[j, 2] - pos[i, 2]
            r2 = ddx * ddx + ddy * ddy + ddz * ddz
            if r2 > h2:
                continue
            t = h2 - r2
            wn = m_over_rho * coef * t * t * t
            vx = vel[j, 0] - vel[i, 0]
            vy = vel[j, 1] - vel[i, 1]
            vz = vel[j, 2] - vel[i, 2]
            dp[i, 0] += dt * viscosity * vx * wn + cohesion * ddx * wn
            dp[i, 1] += dt * viscosity * vy * wn + cohesion * ddy * wn
            dp[i, 2] += dt * viscosity * vz * wn + cohesion * ddz * wn
    return dp_np


def diffuse(double[:, ::1] pos, double[:, ::1] vel, double[:, ::1] colors,
            double[::1] blood, long[::1] starts, long[::1] cols,
            double sigma, double speed_coeff, double radius):
    cdef long n = pos.shape[0]
    new_colors_np = np.array(colors, dtype=np.float64, copy=True)
    new_blood_np = np.array(blood, dtype=np.float64, copy=True)
    cdef double[:, ::1] nc = new_colors_np
    cdef double[::1] nb = new_blood_np
    cdef double inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef long i, k, j, q
    cdef double ddx, ddy, ddz, r, w, wsum, speed
    cdef double acc0, acc1, acc2, accb, v
    cdef double cmin0, cmin1, cmin2, cmax0, cmax1, cmax2, bmin, bmax
    for i in range(n):
        wsum = 1.0
        acc0 = 0.0; acc1 = 0.0; acc2 = 0.0; accb = 0.0
        cmin0 = colors[i, 0]; cmax0 = colors[i, 0]
        cmin1 = colors[i, 1]; cmax1 = colors[i, 1]
        cmin2 = colors[i, 2]; cmax2 = colors[i, 2]
        bmin = blood[i]; bmax = blood[i]
        for k in range(starts[i], starts[i + 1]):
            j = cols[k]
            ddx = pos[i, 0] - pos[j, 0]
            ddy = pos[i, 1] - pos[j, 1]
            ddz = pos[i, 2] - pos[j, 2]
            r = sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
            if r > radius:
                continue
            speed = sqrt(vel[j, 0] ** 2 + vel[j, 1] ** 2 + vel[j, 2] ** 2)
            w = exp(-r * inv2s2) * speed_coeff * speed
            if w <= 0.0:
                continue
            wsum += w
            acc0 += w * (colors[j, 0] - colors[i, 0])
            acc1 += w * (colors[j, 1] - colors[i, 1])
            acc2 += w * (colors[j, 2] - colors[i, 2])
            accb += w * (blood[j] - blood[i])
            if colors[j, 0] < cmin0: cmin0 = colors[j, 0]
            if colors[j, 0] > cmax0: cmax0 = colors[j, 0]
            if colors[j, 1] < cmin1: cmin1 = colors[j, 1]
            if colors[j, 1] > cmax1: cmax1 = colors[j, 1]
            if colors[j, 2] < cmin2: cmin2 = colors[j, 2]
            if colors[j, 2] > cmax2: cmax2 = colors[j, 2]
            if blood[j] < bmin: bmin = blood[j]
            if blood[j] > bmax: bmax = blood[j]
        v = colors[i, 0] + acc0 / wsum
        nc[i, 0] = cmin0 if v < cmin0 else (cmax0 if v > cmax0 else v)
        v = colors[i, 1] + acc1 / wsum
        nc[i, 1] = cmin1 if v < cmin1 else (cmax1 if v > cmax1 else v)
        v = colors[i, 2] + acc2 / wsum
        nc[i, 2] = cmin2 if v < cmin2 else (cmax2 if v > cmax2 else v)
        v = blood[i] + accb / wsum
        nb[i] = bmin if v < bmin else (bmax if v > bmax else v)
    return new_colors_np, new_blood_np
