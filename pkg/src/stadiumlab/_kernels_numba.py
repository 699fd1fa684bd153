"""Numba-jitted grid kernels (default backend when numba imports).

Same contracts as ``_kernels_numpy``; plain sequential loops so results are
reproducible run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def dirichlet_triplets(idx2d, ij, theta, ap, hx, hy, dx):
    n = ij.shape[0]
    diag = np.zeros(n)
    rows = np.empty(4 * n, dtype=np.int64)
    cols = np.empty(4 * n, dtype=np.int64)
    vals = np.empty(4 * n)
    m = 0
    for p in range(n):
        i, j = ij[p, 0], ij[p, 1]
        # East link: flux through the shared face aperture
        q = idx2d[i + 1, j]
        if q >= 0:
            c = ap[p, 1] / dx
            diag[p] += c
            diag[q] += c
            rows[m] = p
            cols[m] = q
            vals[m] = -c
            rows[m + 1] = q
            cols[m + 1] = p
            vals[m + 1] = -c
            m += 2
        else:
            diag[p] += hy[p] / (theta[p, 1] * dx)
        # North link
        q = idx2d[i, j + 1]
        if q >= 0:
            c = ap[p, 3] / dx
            diag[p] += c
            diag[q] += c
            rows[m] = p
            cols[m] = q
            vals[m] = -c
            rows[m + 1] = q
            cols[m + 1] = p
            vals[m + 1] = -c
            m += 2
        else:
            diag[p] += hx[p] / (theta[p, 3] * dx)
        # West / South cuts (interior links already emitted by the neighbour)
        if idx2d[i - 1, j] < 0:
            diag[p] += hy[p] / (theta[p, 0] * dx)
        if idx2d[i, j - 1] < 0:
            diag[p] += hx[p] / (theta[p, 2] * dx)
    return rows[:m], cols[:m], vals[:m], diag


@njit(cache=True)
def ghost_fill(u2d, valid2d, idx2d, ij, theta, u):
    nx, ny = u2d.shape
    acc = np.zeros((nx, ny))
    cnt = np.zeros((nx, ny), dtype=np.int64)
    n = ij.shape[0]
    for p in range(n):
        i, j = ij[p, 0], ij[p, 1]
        for k in range(4):
            if k == 0:
                di, dj = -1, 0
            elif k == 1:
                di, dj = 1, 0
            elif k == 2:
                di, dj = 0, -1
            else:
                di, dj = 0, 1
            gi, gj = i + di, j + dj
            if idx2d[gi, gj] < 0:
                th = theta[p, k]
                q_in = idx2d[i - di, j - dj]
                if q_in >= 0:
                    # quadratic through the boundary zero and two interior nodes
                    b = -(u[p] + th * th * (u[q_in] - u[p])) / (th * th + th)
                    ghost = u[q_in] + 2.0 * b
                else:
                    ghost = u[p] * (1.0 - 1.0 / th)
                acc[gi, gj] += ghost
                cnt[gi, gj] += 1
    for i in range(nx):
        for j in range(ny):
            if cnt[i, j] > 0:
                u2d[i, j] = acc[i, j] / cnt[i, j]
                valid2d[i, j] = True


@njit(cache=True)
def bilinear_gather(u2d, valid2d, gx, gy):
    eps = 1e-12
    nx, ny = u2d.shape
    m = gx.shape[0]
    vals = np.zeros(m)
    ok = np.zeros(m, dtype=np.bool_)
    for p in range(m):
        i0 = int(np.floor(gx[p]))
        j0 = int(np.floor(gy[p]))
        if i0 < 0 or i0 > nx - 2 or j0 < 0 or j0 > ny - 2:
            continue
        fx = gx[p] - i0
        fy = gy[p] - j0
        w00 = (1 - fx) * (1 - fy)
        w10 = fx * (1 - fy)
        w01 = (1 - fx) * fy
        w11 = fx * fy
        if not (valid2d[i0, j0] or w00 <= eps):
            continue
        if not (valid2d[i0 + 1, j0] or w10 <= eps):
            continue
        if not (valid2d[i0, j0 + 1] or w01 <= eps):
            continue
        if not (valid2d[i0 + 1, j0 + 1] or w11 <= eps):
            continue
        vals[p] = (w00 * u2d[i0, j0] + w10 * u2d[i0 + 1, j0]
                   + w01 * u2d[i0, j0 + 1] + w11 * u2d[i0 + 1, j0 + 1])
        ok[p] = True
    return vals, ok


@njit(cache=True)
def xlink_weighted_gradsq(u2d, active2d, wmid, dx):
    nx, ny = u2d.shape
    total = 0.0
    for i in range(nx - 1):
        for j in range(ny):
            if active2d[i, j] and active2d[i + 1, j]:
                du = (u2d[i + 1, j] - u2d[i, j]) / dx
                total += wmid[i, j] * du * du
    return total
