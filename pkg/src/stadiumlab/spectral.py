"""Certified eigenvalue computations on the discrete operator.

Interior windows are solved by ARPACK shift-invert; completeness is
certified with matrix inertia: ``K - sigma M`` is factorized by SuperLU in
symmetric mode with pure diagonal pivoting, which realizes an
LDL^T-equivalent factorization whose negative U-diagonal count equals the
number of eigenvalues below ``sigma`` (Sylvester's law under congruence).
If SuperLU is forced off the diagonal, or a pivot collapses because the
shift sits on an eigenvalue, the shift is perturbed and retried and the
perturbation recorded on the result.

Large lowest-part requests are answered by marching contiguous certified
windows up the spectrum (spectrum slicing) so every slice is a small,
well-conditioned shift-invert solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import DiscreteOperator
from .errors import CertificationError
from .geometry import DomainSpec

DENSE_CUTOFF = 1600
RESIDUAL_REL = 1e-8
_V0_SEED = 20240811
_SINGLE_SHOT_MAX = 64


class _FactorSingular(Exception):
    pass


@dataclass
class EigenPair:
    """One discrete eigenvalue with its M-normalized eigenvector."""

    E: float
    u: np.ndarray
    j: int               # 1-based index by increasing E (global when known)
    residual: float


@dataclass
class SpectralWindow:
    """All eigenpairs in ``[center-halfwidth, center+halfwidth]``, certified."""

    center: float
    halfwidth: float
    pairs: list
    count_below_lo: int
    count_below_hi: int
    lo_used: float
    hi_used: float
    perturbations: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.count_below_hi - self.count_below_lo

    @property
    def certified(self) -> bool:
        return len(self.pairs) == self.count

    def energies(self) -> np.ndarray:
        return np.array([p.E for p in self.pairs])


@dataclass
class LowSpectrum:
    """Lowest eigenpairs (at least as many as asked) plus certified ceiling.

    May hold a few extra pairs when a degenerate cluster straddles the
    requested cut; ``counting_function`` is exact for E up to
    ``certified_up_to``.
    """

    pairs: list
    certified_up_to: float

    def energies(self) -> np.ndarray:
        return np.array([p.E for p in self.pairs])


@dataclass
class WeylFit:
    leading: float        # coefficient of E in N(E) ~ leading*E - sqrt_term*sqrt(E)
    sqrt_term: float
    gamma: float          # min E_j / j over j >= 20
    Gamma: float          # max E_j / j over j >= 20
    n_used: int


# ---------------------------------------------------------------------------
# inertia counts
# ---------------------------------------------------------------------------

def _inertia_once(op: DiscreteOperator, sigma: float) -> int:
    A = (op.K - sigma * sp.diags(op.mass)).tocsc()
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A",
                       diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:   # exactly singular
        raise _FactorSingular(str(exc)) from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise _FactorSingular("off-diagonal pivoting broke symmetry")
    d = lu.U.diagonal()
    if np.min(np.abs(d)) < 1e-12 * np.max(np.abs(d)):
        raise _FactorSingular("near-zero pivot at shift")
    return int(np.count_nonzero(d < 0.0))


def count_below(op: DiscreteOperator, sigma: float, *, direction: float = 1.0,
                record: list | None = None) -> tuple[int, float]:
    """Certified number of eigenvalues strictly below ``sigma``.

    On factorization trouble the shift is nudged by multiples of
    ``1e-8 * scale`` in ``direction`` and retried; each nudge is appended
    to ``record``.  Returns ``(count, shift_actually_used)``.
    """
    scale = max(abs(sigma), 1.0)
    shift = sigma
    for attempt in range(6):
        try:
            return _inertia_once(op, shift), shift
        except _FactorSingular:
            shift = sigma + direction * 1e-8 * scale * (attempt + 1)
            if record is not None:
                record.append((sigma, shift))
    raise CertificationError(
        f"inertia count at shift {sigma!r} failed after endpoint perturbation")


# ---------------------------------------------------------------------------
# eigenpair construction helpers
# ---------------------------------------------------------------------------

def _dense_spectrum(op: DiscreteOperator):
    cached = getattr(op, "_dense_spectrum_cache", None)
    if cached is None:
        w, Z = sla.eigh(op.bmatrix.toarray())
        cached = (w, Z)
        op._dense_spectrum_cache = cached
    return cached


def _make_pairs(op: DiscreteOperator, w, Z, j_offset: int) -> list:
    pairs = []
    for k in range(len(w)):
        u = op.from_plain(Z[:, k])
        imax = int(np.argmax(np.abs(u)))
        if u[imax] < 0:
            u = -u
        res = op.residual_norm(u, w[k])
        if res > RESIDUAL_REL * max(abs(w[k]), 1.0):
            raise CertificationError(
                f"eigenpair residual {res:.3e} exceeds tolerance at E={w[k]:.6g}")
        pairs.append(EigenPair(E=float(w[k]), u=u, j=j_offset + k + 1,
                               residual=res))
    return pairs


def _v0(n: int) -> np.ndarray:
    return np.random.default_rng(_V0_SEED).standard_normal(n)


def _shift_invert(op: DiscreteOperator, k: int, sigma: float,
                  record: list | None = None):
    """ARPACK shift-invert with deterministic start and singular-shift retry."""
    scale = max(abs(sigma), 1.0)
    sig = sigma
    for attempt in range(4):
        try:
            w, Z = spla.eigsh(op.bmatrix, k=k, sigma=sig, which="LM",
                              v0=_v0(op.n), maxiter=5000,
                              ncv=min(op.n - 1, max(2 * k + 20, 40)))
        except RuntimeError:
            sig = sigma + 1e-8 * scale * (attempt + 1)
            if record is not None:
                record.append((sigma, sig))
            continue
        except spla.ArpackError as exc:
            raise CertificationError(f"ARPACK solve failed at shift {sig}: {exc}")
        order = np.argsort(w)
        return w[order], Z[:, order]
    raise CertificationError(f"shift-invert factorization kept failing at {sigma}")


def _solve_slice(op: DiscreteOperator, lo: float, hi: float, c_lo: int,
                 delta: int, perturb: list) -> list:
    """All ``delta`` eigenpairs in ``[lo, hi)``, certified by the mark counts."""
    if delta == 0:
        return []
    center = 0.5 * (lo + hi)
    w, Z = _shift_invert(op, delta, center, record=perturb)
    slack = 1e-10 * max(abs(center), 1.0)
    if not (np.all(w >= lo - slack) and np.all(w < hi + slack)):
        raise CertificationError(
            f"slice [{lo:.9g}, {hi:.9g}) returned eigenvalues outside its "
            "certified range")
    return _make_pairs(op, w, Z, c_lo)


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------

def eigs_window(op: DiscreteOperator, center: float, halfwidth: float) -> SpectralWindow:
    """Every eigenpair with ``E`` in ``[center-halfwidth, center+halfwidth]``.

    The completeness certificate is the pair of inertia counts at the
    endpoints; the number of returned pairs must equal their difference
    exactly.  A lower endpoint at or below zero is legitimate (the count
    there is zero for a positive operator).
    """
    if halfwidth < 0:
        raise ValueError("halfwidth must be nonnegative")
    lo, hi = center - halfwidth, center + halfwidth
    slack = 1e-12 * max(abs(center), 1.0)

    if op.n <= DENSE_CUTOFF:
        w, Z = _dense_spectrum(op)
        c_lo = int(np.count_nonzero(w < lo - slack))
        c_hi = int(np.count_nonzero(w < hi + slack))
        sel = slice(c_lo, c_hi)
        pairs = _make_pairs(op, w[sel], Z[:, sel], c_lo)
        return SpectralWindow(center, halfwidth, pairs, c_lo, c_hi, lo, hi, [])

    perturb: list = []
    c_lo, lo_used = count_below(op, lo, direction=-1.0, record=perturb)
    c_hi, hi_used = count_below(op, hi, direction=+1.0, record=perturb)
    m = c_hi - c_lo
    if m == 0:
        return SpectralWindow(center, halfwidth, [], c_lo, c_hi,
                              lo_used, hi_used, perturb)
    pairs = _solve_slice(op, lo_used, hi_used, c_lo, m, perturb)
    return SpectralWindow(center, halfwidth, pairs, c_lo, c_hi,
                          lo_used, hi_used, perturb)


def _spectral_floor(op: DiscreteOperator) -> float:
    """A certified point strictly below the whole spectrum (Gershgorin)."""
    B = op.bmatrix
    absB = abs(B)
    rowsum = np.asarray(absB.sum(axis=1)).ravel()
    diag = B.diagonal()
    lower = float((diag - (rowsum - np.abs(diag))).min())
    return lower - 0.1 * abs(lower) - 1e-3


def eigs_lowest(op: DiscreteOperator, m: int) -> LowSpectrum:
    """At least the ``m`` smallest eigenpairs with inertia certification.

    A few extra pairs may be returned when a degenerate cluster straddles
    the requested cut, so the certified counting range is always honest.
    """
    if m < 1:
        raise ValueError("need at least one eigenpair")

    if op.n <= DENSE_CUTOFF:
        w, Z = _dense_spectrum(op)
        if m > op.n:
            raise ValueError("more eigenpairs than unknowns")
        jcut = _cluster_cut(w, m)
        if jcut is None:
            return LowSpectrum(_make_pairs(op, w, Z, 0), float(w[-1]))
        upto = 0.5 * (w[jcut - 1] + w[jcut])
        return LowSpectrum(_make_pairs(op, w[:jcut], Z[:, :jcut], 0), float(upto))

    if m > op.n // 10:
        raise ValueError(f"m={m} too large for {op.n} unknowns (need m <= n/10)")
    if m <= _SINGLE_SHOT_MAX:
        return _lowest_single_shot(op, m)
    return _lowest_sliced(op, m)


def _cluster_cut(w, m):
    """First index >= m where a genuine spectral gap opens (None if never)."""
    for j in range(m, len(w)):
        if w[j] - w[j - 1] > max(1e-9 * max(abs(w[j]), 1.0), 1e-12):
            return j
    return None


def _lowest_single_shot(op: DiscreteOperator, m: int) -> LowSpectrum:
    perturb: list = []
    sigma0 = _spectral_floor(op)
    k = min(m + 4, op.n - 2)
    for _ in range(3):
        w, Z = _shift_invert(op, k, sigma0, record=perturb)
        jcut = _cluster_cut(w, m)
        if jcut is not None and jcut < len(w):
            sigma_cert = 0.5 * (w[jcut - 1] + w[jcut])
            count, used = count_below(op, sigma_cert, record=perturb)
            if count != jcut:
                raise CertificationError(
                    f"missed eigenvalue: inertia counts {count} below "
                    f"{used:.9g} but the solver returned {jcut}")
            return LowSpectrum(_make_pairs(op, w[:jcut], Z[:, :jcut], 0),
                               float(sigma_cert))
        k = min(k + 8, op.n - 2)
    raise CertificationError(
        "no resolvable spectral gap found to certify the lowest eigenpairs")


def _lowest_sliced(op: DiscreteOperator, m: int) -> LowSpectrum:
    """March contiguous certified slices up the spectrum until m pairs."""
    perturb: list = []
    floor = _spectral_floor(op)
    c0, mark = count_below(op, floor, record=perturb)
    if c0 != 0:
        raise CertificationError("spectral floor estimate was not below "
                                 "the whole spectrum")
    # Weyl-guided slice width: aim at ~40 eigenvalues per slice
    density = float(np.sum(op.mass)) / (4.0 * math.pi)
    width = max(40.0 / density, 1e-2)
    pairs: list = []
    count_here = 0
    while count_here <= m:
        c_next, mark_next = count_below(op, mark + width, direction=+1.0,
                                        record=perturb)
        delta = c_next - count_here
        if delta > 0:
            pairs.extend(_solve_slice(op, mark, mark_next, count_here,
                                      delta, perturb))
        mark = mark_next
        count_here = c_next
    return LowSpectrum(pairs, float(mark))


def counting_function(spectrum: LowSpectrum, E: float) -> int:
    """N(E): number of eigenvalues at most E, within the certified range."""
    if E > spectrum.certified_up_to:
        raise ValueError(
            f"E={E} above the certified range {spectrum.certified_up_to}")
    return int(np.count_nonzero(spectrum.energies() <= E))


def weyl_fit(spectrum: LowSpectrum, spec: DomainSpec) -> WeylFit:
    """Least-squares fit ``N(E) ~ c1 E - c2 sqrt(E)`` plus index-ratio bounds."""
    E = spectrum.energies()
    if E.size < 200:
        raise ValueError("Weyl fit needs at least 200 certified eigenvalues")
    j = np.arange(1, E.size + 1, dtype=float)
    A = np.stack([E, -np.sqrt(E)], axis=1)
    coef, *_ = np.linalg.lstsq(A, j, rcond=None)
    sel = j >= 20
    ratios = E[sel] / j[sel]
    return WeylFit(leading=float(coef[0]), sqrt_term=float(coef[1]),
                   gamma=float(ratios.min()), Gamma=float(ratios.max()),
                   n_used=int(E.size))
