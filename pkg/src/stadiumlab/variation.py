"""Eigenvalue variation along the aspect-parameter family.

Two independent rates are computed per eigenpair:

* boundary route: ``dE/dt = -integral rho (d_n u)^2 ds`` over the boundary
  trace (Dirichlet only);
* interior route: ``dE/dt = -(1/2) * [4 <p u_x, u_x> - <p'' u, u>]`` with
  ``p`` the flow-scaled pushforward transport profile (any flat-side
  condition).

Both measure the same per-unit-t flow in which the wings translate at
speed pi/2, so they agree with each other and with finite differences of
tracked eigenvalue branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .discretize import (
    DiscreteOperator,
    assemble_laplacian,
    boundary_normal_derivative,
    build_grid,
    stretch_quadratic_form,
)
from .errors import UnsupportedBCError
from .geometry import (
    FLOW_SCALE,
    PROFILE_RADIUS,
    BoundaryTrace,
    DomainSpec,
    boundary_trace,
    normal_velocity,
    stretch_profile,
    stretch_support_radius,
)
from .spectral import EigenPair, eigs_lowest

OVERLAP_AMBIGUITY = 0.05
MIN_CONTINUATION_OVERLAP = 0.8


def hadamard_rate_boundary(pair: EigenPair, spec: DomainSpec,
                           trace: BoundaryTrace, op: DiscreteOperator):
    """Boundary-integral eigenvalue rate and its normalized version.

    Returns ``(dotE, f)`` with ``f = -dotE / E`` so that ``dotE = -E f``.
    Flagged trace samples (stencil leaving the covered region) are dropped
    and their quadrature weight redistributed over the survivors.
    """
    if op.bc.kind != "dirichlet":
        raise UnsupportedBCError("the boundary variation formula is "
                                 "implemented for the Dirichlet condition")
    dn, ok = boundary_normal_derivative(op, pair.u, trace)
    rho = normal_velocity(spec, trace)
    w = redistribute_weights(trace, ok)
    dot = -float(np.sum(w[ok] * rho[ok] * dn[ok] ** 2))
    return dot, -dot / pair.E


def redistribute_weights(trace: BoundaryTrace, ok: np.ndarray) -> np.ndarray:
    """Hand each flagged sample's weight to its nearest surviving neighbour.

    Redistribution is local (by arclength, same piece preferred) so the
    total weight still sums to the perimeter without distorting smooth
    integrands far from the flagged spots.
    """
    w = trace.w.copy()
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        return w
    good = np.nonzero(ok)[0]
    if good.size == 0:
        raise UnsupportedBCError("no usable boundary samples")
    for b in bad:
        same = good[trace.piece[good] == trace.piece[b]]
        pool = same if same.size else good
        target = pool[np.argmin(np.abs(trace.s[pool] - trace.s[b]))]
        w[target] += w[b]
        w[b] = 0.0
    return w


def boundary_rate_trace(pair: EigenPair, spec: DomainSpec,
                        trace: BoundaryTrace, op: DiscreteOperator):
    """Scaled normal-derivative trace ``E^{-1/2} d_n u`` plus its flag mask."""
    dn, ok = boundary_normal_derivative(op, pair.u, trace)
    return dn / math.sqrt(pair.E), ok


def flow_profile(t: float, radius: float = PROFILE_RADIUS):
    """x-profile of the per-unit-t transport flow (integral = pi)."""

    def values(x):
        return FLOW_SCALE * stretch_profile(x, t, radius)[0]

    return values


def hadamard_rate_interior(pair: EigenPair, op: DiscreteOperator,
                           radius: float = PROFILE_RADIUS) -> float:
    """Interior-form eigenvalue rate; valid for any flat-side condition."""
    t = op.grid.spec.t
    form = stretch_quadratic_form(op, pair.u, flow_profile(t, radius))
    return -0.5 * form


def interior_rate_bound(t: float, radius: float = PROFILE_RADIUS) -> float:
    """Upper bound ``dotE <= max|p''|/2`` from positivity of the gradient term."""
    x = np.linspace(-stretch_support_radius(t, radius),
                    stretch_support_radius(t, radius), 8193)
    d2 = stretch_profile(x, t, radius)[2]
    return 0.5 * FLOW_SCALE * float(np.max(np.abs(d2)))


# ---------------------------------------------------------------------------
# branch tracking
# ---------------------------------------------------------------------------

@dataclass
class Branch:
    """One continued eigenvalue branch over the t-grid."""

    label: int
    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    f: list = field(default_factory=list)
    dot_boundary: list = field(default_factory=list)
    dot_interior: list = field(default_factory=list)
    sorted_index: list = field(default_factory=list)
    overlap: list = field(default_factory=list)       # with previous sample
    degenerate: list = field(default_factory=list)
    crossings: list = field(default_factory=list)     # t where sorted index moved

    def arrays(self):
        return {k: np.asarray(getattr(self, k))
                for k in ("t", "E", "f", "dot_boundary", "dot_interior",
                          "sorted_index", "overlap", "degenerate")}


def _overlap_matrix(prev_ops, prev_vecs, op, pairs):
    """Plain-lattice overlaps between tracked vectors and fresh pairs."""
    gp, gc = prev_ops.grid, op.grid
    ilo = max(gp.i0, gc.i0)
    ihi = min(gp.i0 + gp.nx, gc.i0 + gc.nx)
    jlo = max(gp.j0, gc.j0)
    jhi = min(gp.j0 + gp.ny, gc.j0 + gc.ny)
    dx2 = gc.dx ** 2

    def crop(grid, arr2d):
        return arr2d[ilo - grid.i0:ihi - grid.i0, jlo - grid.j0:jhi - grid.j0]

    P = np.stack([crop(gp, prev_ops.scatter(v)).ravel() for v in prev_vecs])
    C = np.stack([crop(gc, op.scatter(p.u)).ravel() for p in pairs])
    return dx2 * (P @ C.T)


def track_branches(base_spec: DomainSpec, t_grid, count: int, dx: float,
                   n_samples: int = 2048, extra: int = 6,
                   with_rates: bool = True) -> list[Branch]:
    """Continue the lowest ``count`` eigenvalue branches across ``t_grid``.

    Branch identity follows maximal eigenvector overlap between consecutive
    parameters; a second candidate within 0.05 of the best flags the sample
    degenerate and freezes the identity (assignment by sorted position)
    through the flagged region.  Each sample is annotated with both
    variation rates; sorted-index changes are recorded as crossings.
    """
    t_grid = sorted(float(t) for t in t_grid)
    if len(t_grid) >= 2:
        steps = np.diff(t_grid)
        if steps.max() > 0.05 + 1e-12:
            raise ValueError("t-grid spacing must be at most 0.05 for "
                             "reliable branch continuation")
    branches = [Branch(label=j + 1) for j in range(count)]
    prev_op = None
    prev_vecs = None        # tracked eigenvectors, branch order
    prev_rank = None        # sorted index per branch

    for t in t_grid:
        spec_t = base_spec.at_parameter(t)
        grid = build_grid(spec_t, dx)
        op = assemble_laplacian(grid)
        trace = boundary_trace(spec_t, n_samples)
        low = eigs_lowest(op, count + extra)
        pairs = low.pairs

        if prev_op is None:
            assign = list(range(count))
            overlaps = [1.0] * count
            degen = [False] * count
        else:
            ovl = np.abs(_overlap_matrix(prev_op, prev_vecs, op, pairs))
            assign, overlaps, degen = _match_branches(ovl, prev_rank)

        vecs = []
        for b, branch in enumerate(branches):
            p = pairs[assign[b]]
            rank = assign[b]
            if branch.sorted_index and branch.sorted_index[-1] != rank:
                branch.crossings.append(t)
            if with_rates:
                if op.bc.kind == "dirichlet":
                    dot_b, fval = hadamard_rate_boundary(p, spec_t, trace, op)
                else:
                    dot_b, fval = math.nan, math.nan
                dot_i = hadamard_rate_interior(p, op)
            else:
                dot_b = dot_i = fval = math.nan
            branch.t.append(t)
            branch.E.append(p.E)
            branch.f.append(fval)
            branch.dot_boundary.append(dot_b)
            branch.dot_interior.append(dot_i)
            branch.sorted_index.append(rank)
            branch.overlap.append(overlaps[b])
            branch.degenerate.append(degen[b])
            vecs.append(p.u)
        prev_op, prev_vecs = op, vecs
        prev_rank = [branch.sorted_index[-1] for branch in branches]
    return branches


def _match_branches(ovl, prev_rank):
    """Maximal-overlap assignment (Hungarian) with ambiguity flagging.

    A sample is flagged degenerate when its two best candidates are within
    0.05 of each other (near-crossing: identity is whatever the optimal
    assignment freezes it to) or when the matched overlap itself is weak.
    """
    nb, nc = ovl.shape
    rows, cols = linear_sum_assignment(-ovl)
    assign = [0] * nb
    overlaps = [0.0] * nb
    degen = [False] * nb
    for b, c in zip(rows, cols):
        assign[b] = int(c)
        overlaps[b] = float(ovl[b, c])
        top = np.sort(ovl[b])[::-1]
        ambiguous = top.size > 1 and top[0] - top[1] < OVERLAP_AMBIGUITY
        degen[b] = bool(ambiguous or overlaps[b] < MIN_CONTINUATION_OVERLAP)
    return assign, overlaps, degen


# ---------------------------------------------------------------------------
# validation against finite differences
# ---------------------------------------------------------------------------

def finite_difference_check(branch: Branch):
    """Central-difference slope vs both variation rates at interior samples.

    Returns a dict of arrays (t, fd, err_boundary, err_interior); flagged
    degenerate samples are excluded.
    """
    t = np.asarray(branch.t)
    E = np.asarray(branch.E)
    if t.size < 3:
        raise ValueError("finite differences need at least three samples")
    rows = {"t": [], "fd": [], "err_boundary": [], "err_interior": []}
    for k in range(1, t.size - 1):
        if branch.degenerate[k] or branch.degenerate[k - 1] or branch.degenerate[k + 1]:
            continue
        fd = (E[k + 1] - E[k - 1]) / (t[k + 1] - t[k - 1])
        if fd == 0.0:
            continue
        rows["t"].append(t[k])
        rows["fd"].append(fd)
        rows["err_boundary"].append(abs(branch.dot_boundary[k] - fd) / abs(fd))
        rows["err_interior"].append(abs(branch.dot_interior[k] - fd) / abs(fd))
    return {k: np.asarray(v) for k, v in rows.items()}


@dataclass
class DecayLawResult:
    median_f: float        # median of f over the top-energy half
    k_quadrature: float    # integral of rho ds from the boundary trace
    area: float
    k_over_area: float
    ratio: float           # median_f / (k / area)


def decay_law_check(spec: DomainSpec, energies, f_values,
                    n_samples: int = 4096) -> DecayLawResult:
    """Compare the bulk decay fraction with the geometric law ``k / A``.

    Pointwise convergence of f is exactly the unique-equidistribution
    hypothesis, so only the bulk (median over the top half by energy) is
    compared; individual modes may and do deviate.
    """
    energies = np.asarray(energies, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    if energies.size < 100:
        raise ValueError("decay-law comparison needs at least 100 branches")
    order = np.argsort(energies)
    top = order[energies.size // 2:]
    med = float(np.median(f_values[top]))
    trace = boundary_trace(spec, n_samples)
    rho = normal_velocity(spec, trace)
    k = float(np.sum(trace.w * rho))
    area = spec.area()
    return DecayLawResult(median_f=med, k_quadrature=k, area=area,
                          k_over_area=k / area, ratio=med / (k / area))
