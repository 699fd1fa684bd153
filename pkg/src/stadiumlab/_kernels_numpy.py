"""Pure-numpy implementations of the grid kernels.

Functionally identical to the numba twins in ``_kernels_numba``; selected
with ``STADIUMLAB_BACKEND=numpy``.  Kept vectorized so the fallback is
usable, not just correct.
"""

from __future__ import annotations

import numpy as np


def dirichlet_triplets(idx2d, ij, theta, ap, hx, hy, dx):
    """COO entries of the symmetric embedded-boundary stiffness matrix.

    Interior-interior links carry the exact aperture of the shared face;
    cut links (non-interior lattice neighbour) couple the node to the
    Dirichlet zero at distance ``theta*dx`` through the cell's transverse
    inside extent.  Returns ``(rows, cols, vals, diag)`` with off-diagonal
    entries only; the matrix is symmetric by construction.
    """
    n = ij.shape[0]
    i, j = ij[:, 0], ij[:, 1]
    diag = np.zeros(n)
    rows_list, cols_list, vals_list = [], [], []

    # interior links: emit East and North once per link, mirrored
    for axis, kface in ((0, 1), (1, 3)):
        q = idx2d[i + 1, j] if axis == 0 else idx2d[i, j + 1]
        has = q >= 0
        p_link = np.nonzero(has)[0]
        q_link = q[has]
        c = ap[p_link, kface] / dx
        np.add.at(diag, p_link, c)
        np.add.at(diag, q_link, c)
        rows_list += [p_link, q_link]
        cols_list += [q_link, p_link]
        vals_list += [-c, -c]

    # boundary-cut links contribute to the diagonal only (value 0 at the cut)
    for k, tw in ((0, hy), (1, hy), (2, hx), (3, hx)):
        di, dj = ((-1, 0), (1, 0), (0, -1), (0, 1))[k]
        cut = idx2d[i + di, j + dj] < 0
        sel = np.nonzero(cut)[0]
        np.add.at(diag, sel, tw[sel] / (theta[sel, k] * dx))

    rows = np.concatenate(rows_list) if rows_list else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols_list) if cols_list else np.empty(0, dtype=np.int64)
    vals = np.concatenate(vals_list) if vals_list else np.empty(0)
    return rows, cols, vals, diag


def ghost_fill(u2d, valid2d, idx2d, ij, theta, u):
    """Extrapolated ghost values outside the Dirichlet boundary.

    For each interior node p with a non-interior lattice neighbour g, the
    ghost at g continues u through the boundary zero at distance
    ``theta*dx`` beyond p.  When the opposite neighbour is interior the
    continuation is quadratic (boundary zero + two interior values),
    otherwise linear (``u_p (1 - 1/theta)``).  Multiple contributions
    average.  Mutates ``u2d``/``valid2d`` in place.
    """
    nx, ny = u2d.shape
    acc = np.zeros((nx, ny))
    cnt = np.zeros((nx, ny), dtype=np.int64)
    offs = ((-1, 0), (1, 0), (0, -1), (0, 1))
    for k, (di, dj) in enumerate(offs):
        gi = ij[:, 0] + di
        gj = ij[:, 1] + dj
        cut = idx2d[gi, gj] < 0
        if not np.any(cut):
            continue
        sel = np.nonzero(cut)[0]
        th = theta[sel, k]
        q_in = idx2d[ij[sel, 0] - di, ij[sel, 1] - dj]
        u_in = np.where(q_in >= 0, u[np.maximum(q_in, 0)], 0.0)
        b = -(u[sel] + th * th * (u_in - u[sel])) / (th * th + th)
        ghost_quad = u_in + 2.0 * b
        ghost_lin = u[sel] * (1.0 - 1.0 / th)
        ghost = np.where(q_in >= 0, ghost_quad, ghost_lin)
        np.add.at(acc, (gi[sel], gj[sel]), ghost)
        np.add.at(cnt, (gi[sel], gj[sel]), 1)
    got = cnt > 0
    u2d[got] = acc[got] / cnt[got]
    valid2d |= got


def bilinear_gather(u2d, valid2d, gx, gy):
    """Bilinear interpolation at lattice-unit coordinates ``(gx, gy)``.

    Returns ``(values, ok)``; a sample is ok when every cell corner that
    carries nonnegligible bilinear weight holds valid data (interior value
    or ghost).  Zero-weight corners are ignored so points lying exactly on
    grid lines never depend on data across them.
    """
    eps = 1e-12
    nx, ny = u2d.shape
    i0 = np.floor(gx).astype(np.int64)
    j0 = np.floor(gy).astype(np.int64)
    inb = (i0 >= 0) & (i0 <= nx - 2) & (j0 >= 0) & (j0 <= ny - 2)
    i0c = np.clip(i0, 0, nx - 2)
    j0c = np.clip(j0, 0, ny - 2)
    fx = gx - i0c
    fy = gy - j0c
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    ok = (inb
          & (valid2d[i0c, j0c] | (w00 <= eps))
          & (valid2d[i0c + 1, j0c] | (w10 <= eps))
          & (valid2d[i0c, j0c + 1] | (w01 <= eps))
          & (valid2d[i0c + 1, j0c + 1] | (w11 <= eps)))
    vals = (w00 * u2d[i0c, j0c] + w10 * u2d[i0c + 1, j0c]
            + w01 * u2d[i0c, j0c + 1] + w11 * u2d[i0c + 1, j0c + 1])
    return np.where(ok, vals, 0.0), ok


def xlink_weighted_gradsq(u2d, active2d, wmid, dx):
    """Sum of ``wmid * ((u_E - u_W)/dx)^2`` over horizontal lattice links.

    ``wmid`` has shape ``(nx-1, ny)`` and already folds the profile value
    at the link midpoint, any y-cutoff, and the link measure.  Links with a
    non-active endpoint are skipped (the profiles used here vanish there).
    """
    du = (u2d[1:, :] - u2d[:-1, :]) / dx
    both = active2d[1:, :] & active2d[:-1, :]
    return float(np.sum(np.where(both, wmid * du * du, 0.0)))
