"""Scar detection pipeline: loitering windows, overlaps, bouncing-ball mass.

For each vertical mode number n the window ``[n^2 - a, n^2 + a]`` is
certified and solved, the quasimode's projection mass and best single
overlap recorded, and the best eigenfunction's position/momentum
bouncing-ball diagnostics computed.  A report is flagged a scar candidate
when the pigeonhole overlap bound is met and the position mass exceeds
twice its equidistributed baseline; the factor two is an operational
reporting threshold and is carried in the report itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .bumps import plateau, quartic_bump
from .discretize import DiscreteOperator, xgrad_quadratic
from .errors import CertificationError, CutoffSupportError
from .geometry import BETA, PROFILE_RADIUS, stretch_profile
from .quasimode import (
    EnvelopeProfile,
    Quasimode,
    best_overlap,
    discrete_residual,
    make_envelope,
    make_quasimode,
    projection_mass,
)
from .spectral import count_below, eigs_window

EXCESS_FACTOR = 2.0


@dataclass(frozen=True)
class Cutoff:
    """A [0,1]-valued separable cutoff with known support half-width."""

    axis: str          # 'x' or 'y'
    support: float

    def __call__(self, v):
        raise NotImplementedError


@dataclass(frozen=True)
class BumpCutoff(Cutoff):
    def __call__(self, v):
        return quartic_bump(v, self.support)[0]


@dataclass(frozen=True)
class PlateauCutoff(Cutoff):
    inner: float = 0.0

    def __call__(self, v):
        return plateau(v, self.inner, self.support)


def default_position_cutoffs():
    """Defaults: quartic bump in x on |x|<=pi/4; y-plateau 1 near 0, gone by 0.4*pi."""
    eta = BumpCutoff(axis="x", support=PROFILE_RADIUS)
    zeta = PlateauCutoff(axis="y", support=0.4 * math.pi, inner=0.2 * math.pi)
    return eta, zeta


def _check_cutoffs(op: DiscreteOperator, eta: Cutoff, zeta: Cutoff):
    spec = op.grid.spec
    if eta.support >= spec.alpha - 1e-12:
        raise CutoffSupportError(
            f"x-cutoff support {eta.support:.6g} leaks outside |x| < alpha")
    if zeta.support >= spec.beta - 1e-12:
        raise CutoffSupportError(
            f"y-cutoff support {zeta.support:.6g} leaks outside |y| < beta")


# ---------------------------------------------------------------------------
# window counting and loitering candidates
# ---------------------------------------------------------------------------

@dataclass
class WindowCount:
    n: int
    count: int
    halfwidth: float
    lo: float
    hi: float


def window_count_scan(op: DiscreteOperator, n_values, halfwidth=None,
                      env: EnvelopeProfile | None = None) -> list[WindowCount]:
    """Certified eigenvalue counts in ``[n^2 - a, n^2 + a]`` per n.

    ``halfwidth=None`` uses the per-n default ``a = 2 K_d`` with ``K_d``
    the measured discrete quasimode residual.
    """
    if halfwidth is None and env is None:
        env = make_envelope()
    out = []
    for n in n_values:
        n = int(n)
        if halfwidth is None:
            a = 2.0 * discrete_residual(op, make_quasimode(op, env, n))
        else:
            a = float(halfwidth)
        lo, hi = n * n - a, n * n + a
        c_lo, lo_used = count_below(op, lo, direction=-1.0)
        c_hi, hi_used = count_below(op, hi, direction=+1.0)
        out.append(WindowCount(n=n, count=c_hi - c_lo, halfwidth=a,
                               lo=lo_used, hi=hi_used))
    return out


def find_loitering(counts: list[WindowCount], m_max: int) -> list[WindowCount]:
    """Window counts at most ``m_max``, sorted by (count, n)."""
    picked = [c for c in counts if c.count <= m_max]
    return sorted(picked, key=lambda c: (c.count, c.n))


# ---------------------------------------------------------------------------
# bouncing-ball mass diagnostics
# ---------------------------------------------------------------------------

def bouncing_ball_mass_position(op: DiscreteOperator, u: np.ndarray,
                                eta: Cutoff | None = None,
                                zeta: Cutoff | None = None) -> float:
    """Position-space mass ``integral eta(x) zeta(y) u^2``.

    Equidistributed modes score close to the cutoff's mean value
    (``equidistributed_baseline``); excess above that baseline is the
    position-space scar signal.
    """
    d_eta, d_zeta = default_position_cutoffs()
    eta = eta or d_eta
    zeta = zeta or d_zeta
    _check_cutoffs(op, eta, zeta)
    cut = eta(op.xy[:, 0]) * zeta(op.xy[:, 1])
    return float(np.dot(op.mass * cut, u * u))


def equidistributed_baseline(op: DiscreteOperator,
                             eta: Cutoff | None = None,
                             zeta: Cutoff | None = None) -> float:
    """Discrete mean of the cutoff: the exact score of a constant density."""
    d_eta, d_zeta = default_position_cutoffs()
    eta = eta or d_eta
    zeta = zeta or d_zeta
    _check_cutoffs(op, eta, zeta)
    cut = eta(op.xy[:, 0]) * zeta(op.xy[:, 1])
    return float(np.dot(op.mass, cut) / np.sum(op.mass))


def bouncing_ball_mass_momentum(op: DiscreteOperator, pair,
                                zeta: Cutoff | None = None,
                                radius: float = PROFILE_RADIUS) -> float:
    """Horizontal semiclassical energy ``||zeta (p)^(1/2) (h d_x) u||^2``.

    ``h = E^(-1/2)``; ``p`` is the unit transport profile at the domain's
    parameter.  Near zero together with a large position mass it signals
    concentration on vertical (bouncing-ball) motion over the profile's
    support.
    """
    if zeta is None:
        zeta = default_position_cutoffs()[1]
    t = op.grid.spec.t

    def xweight(x):
        return stretch_profile(x, t, radius)[0]

    r = xgrad_quadratic(op, pair.u, xweight,
                        yweight=lambda y: zeta(y) ** 2)
    return r / pair.E


# ---------------------------------------------------------------------------
# per-(t, n) scar report
# ---------------------------------------------------------------------------

@dataclass
class ScarReport:
    t: float
    n: int
    halfwidth: float
    count: int
    mass: float
    best_overlap: float
    best_eigenvalue: float
    pigeonhole_bound: float
    bb_mass_position: float
    bb_mass_momentum: float
    bb_baseline: float
    scar_candidate: bool
    excess_factor: float
    dx: float

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["n"] = int(rec["n"])
        rec["count"] = int(rec["count"])
        rec["scar_candidate"] = bool(rec["scar_candidate"])
        return rec


def scar_report(op: DiscreteOperator, n: int,
                env: EnvelopeProfile | None = None,
                halfwidth: float | None = None,
                eta: Cutoff | None = None, zeta: Cutoff | None = None,
                excess_factor: float = EXCESS_FACTOR) -> ScarReport:
    """Assemble the full detection record for one (t, n)."""
    env = env or make_envelope()
    q = make_quasimode(op, env, n)
    kd = discrete_residual(op, q)
    a = 2.0 * kd if halfwidth is None else float(halfwidth)
    window = eigs_window(op, float(n * n), a)
    m = len(window.pairs)
    if m > 0:
        mass = projection_mass(q, window, op)
        best = best_overlap(q, window, op)
        bound = best.pigeonhole_bound
        if mass >= 0.75 and best.value < bound - 1e-12:
            raise CertificationError(
                "pigeonhole implication violated: mass >= 3/4 but best "
                f"overlap {best.value:.6f} < {bound:.6f}")
        bb_pos = bouncing_ball_mass_position(op, best.pair.u, eta, zeta)
        bb_mom = bouncing_ball_mass_momentum(op, best.pair, zeta)
        base = equidistributed_baseline(op, eta, zeta)
        candidate = (mass >= 0.75 and best.value >= bound - 1e-12
                     and bb_pos >= excess_factor * base)
        best_val, best_E = best.value, best.pair.E
    else:
        mass = 0.0
        best_val = 0.0
        best_E = math.nan
        bound = math.nan
        bb_pos = math.nan
        bb_mom = math.nan
        base = equidistributed_baseline(op, eta, zeta)
        candidate = False
    return ScarReport(t=op.grid.spec.t, n=int(n), halfwidth=a, count=m,
                      mass=mass, best_overlap=best_val, best_eigenvalue=best_E,
                      pigeonhole_bound=bound, bb_mass_position=bb_pos,
                      bb_mass_momentum=bb_mom, bb_baseline=base,
                      scar_candidate=candidate, excess_factor=excess_factor,
                      dx=op.dx)
