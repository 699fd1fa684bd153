"""Bouncing-ball quasimodes: envelope profiles, residual bounds, overlaps.

A quasimode is a vertical-wave pattern localized in the middle of the
rectangle: an x-envelope supported in ``[-pi/4, pi/4]`` times ``sin(n y)``
(even n) or ``cos(n y)`` (odd n), both of which vanish on the horizontal
Dirichlet sides.  Its Laplacian residual against ``n^2`` is controlled by
the envelope curvature alone, uniformly in n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bumps import exp_bump
from .discretize import DiscreteOperator
from .errors import CertificationError, GridResolutionError, UnsupportedBCError
from .spectral import SpectralWindow

ENVELOPE_RADIUS = math.pi / 4.0
# L2 normalization target: ||envelope||^2 * ||sin(n y)||^2_(-pi/2,pi/2) = 1
ENVELOPE_NORM_SQ = 2.0 / math.pi


@dataclass(frozen=True)
class EnvelopeProfile:
    """Closed-form x-envelope with evaluations of itself and two derivatives."""

    kind: str
    radius: float
    amplitude: float
    k_bound: float        # continuum residual bound ||chi''|| / ||chi||

    def chi(self, x):
        return self.amplitude * self._raw(x)[0]

    def chi_d1(self, x):
        return self.amplitude * self._raw(x)[1]

    def chi_d2(self, x):
        return self.amplitude * self._raw(x)[2]

    def _raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "cos2":
            inside = np.abs(x) < self.radius
            f = np.where(inside, np.cos(2.0 * x) ** 2, 0.0)
            d1 = np.where(inside, -2.0 * np.sin(4.0 * x), 0.0)
            d2 = np.where(inside, -8.0 * np.cos(4.0 * x), 0.0)
            return f, d1, d2
        return exp_bump(x, self.radius)


def _raw_eval(kind, radius):
    if kind == "cos2":
        return (lambda x: math.cos(2.0 * x) ** 2,
                lambda x: -8.0 * math.cos(4.0 * x))
    return (lambda x: float(exp_bump(x, radius)[0]),
            lambda x: float(exp_bump(x, radius)[2]))


def make_envelope(kind: str = "cos2") -> EnvelopeProfile:
    """Build an envelope family member, normalized so ``||chi||^2 = 2/pi``."""
    if kind not in ("cos2", "smooth"):
        raise ValueError(f"unknown envelope family {kind!r}")
    r = ENVELOPE_RADIUS
    f, _ = _raw_eval(kind, r)
    raw_norm_sq, _ = quad(lambda x: f(x) ** 2, -r, r, limit=200)
    amplitude = math.sqrt(ENVELOPE_NORM_SQ / raw_norm_sq)
    env = EnvelopeProfile(kind=kind, radius=r, amplitude=amplitude, k_bound=0.0)
    k = residual_bound(env)
    return EnvelopeProfile(kind=kind, radius=r, amplitude=amplitude, k_bound=k)


def residual_bound(env: EnvelopeProfile) -> float:
    """Continuum residual bound ``K = ||chi''|| / ||chi||`` by 1-D quadrature.

    Uniform in n: the vertical factor is an exact 1-D eigenfunction, so
    ``(Lap - n^2)(chi * trig) = -chi'' * trig``.  Scaling chi cancels.
    """
    f, fpp = _raw_eval(env.kind, env.radius)
    r = env.radius
    num, _ = quad(lambda x: fpp(x) ** 2, -r, r, limit=200)
    den, _ = quad(lambda x: f(x) ** 2, -r, r, limit=200)
    return math.sqrt(num / den)


@dataclass
class Quasimode:
    """Discrete bouncing-ball quasimode, normalized to 1 in the M-norm."""

    n: int
    parity: str            # 'sin' (even n) or 'cos' (odd n)
    v: np.ndarray
    k_bound: float         # continuum residual bound of its envelope


def vertical_factor(n: int, y):
    """The 1-D vertical eigenfunction factor (vanishes at y = +-pi/2)."""
    y = np.asarray(y, dtype=float)
    return np.sin(n * y) if n % 2 == 0 else np.cos(n * y)


def make_quasimode(op: DiscreteOperator, env: EnvelopeProfile, n: int) -> Quasimode:
    """Sample ``chi(x) * trig(n y)`` on the grid and renormalize exactly."""
    if n < 2 or int(n) != n:
        raise ValueError("vertical mode number n must be an integer >= 2")
    if op.bc.kind != "dirichlet":
        raise UnsupportedBCError(
            "quasimodes are implemented for the Dirichlet condition on the "
            "horizontal sides (sin/cos vertical factors)")
    if n * op.dx > math.pi / 6.0 + 1e-12:
        raise GridResolutionError(
            f"n={n} under-resolved at dx={op.dx:.6g}: need n*dx <= pi/6 "
            "(>= 12 points per vertical wavelength)")
    if env.radius >= op.grid.spec.alpha:
        raise GridResolutionError("envelope support exceeds the rectangle")
    x, y = op.xy[:, 0], op.xy[:, 1]
    v = env.chi(x) * vertical_factor(n, y)
    nrm = op.norm(v)
    if nrm == 0.0:
        raise CertificationError("quasimode sampled to zero on this grid")
    return Quasimode(n=int(n), parity="sin" if n % 2 == 0 else "cos",
                     v=v / nrm, k_bound=env.k_bound)


def discrete_residual(op: DiscreteOperator, q: Quasimode) -> float:
    """Measured residual ``||(L - n^2) v||`` in the discrete norm."""
    return op.residual_norm(q.v, float(q.n) ** 2)


def projection_mass(q: Quasimode, window: SpectralWindow,
                    op: DiscreteOperator) -> float:
    """Squared norm of the quasimode's projection onto the window pairs.

    Requires a certified window.  If the window covers
    ``[n^2 - 2K_d, n^2 + 2K_d]`` with ``K_d`` the measured discrete
    residual, the spectral theorem forces the result to be >= 3/4; that
    implication is asserted because it is exact at the discrete level.
    """
    if not window.certified:
        raise CertificationError("projection mass needs a certified window")
    mass = 0.0
    for p in window.pairs:
        mass += op.inner(p.u, q.v) ** 2
    kd = discrete_residual(op, q)
    n2 = float(q.n) ** 2
    covers = (window.lo_used <= n2 - 2.0 * kd + 1e-12
              and window.hi_used >= n2 + 2.0 * kd - 1e-12)
    if covers and mass < 0.75 - 1e-10:
        raise CertificationError(
            f"spectral-theorem bound violated: mass {mass:.6f} < 3/4 on a "
            f"window covering two residual widths around n^2={n2:.6g}")
    return mass


@dataclass
class OverlapResult:
    pair: object           # EigenPair or None when the window is empty
    value: float
    pigeonhole_bound: float

    @property
    def empty(self) -> bool:
        return self.pair is None


def best_overlap(q: Quasimode, window: SpectralWindow,
                 op: DiscreteOperator) -> OverlapResult:
    """The window eigenpair with the largest |<u_j, v>| plus the M-count bound.

    With M pairs in the window and projection mass >= 3/4, the pigeonhole
    bound is ``sqrt(3/(4M))``.
    """
    if not window.certified:
        raise CertificationError("best overlap needs a certified window")
    if not window.pairs:
        return OverlapResult(pair=None, value=0.0, pigeonhole_bound=math.nan)
    overlaps = np.array([abs(op.inner(p.u, q.v)) for p in window.pairs])
    kbest = int(np.argmax(overlaps))
    bound = math.sqrt(3.0 / (4.0 * len(window.pairs)))
    return OverlapResult(pair=window.pairs[kbest],
                         value=float(overlaps[kbest]),
                         pigeonhole_bound=bound)
