"""One-parameter family of partially rectangular planar domains.

Every domain is a flat rectangle ``[-alpha, alpha] x [-beta, beta]`` with
``beta = pi/2`` fixed and ``alpha = t*beta``, plus "wings" (piecewise
segments and circular arcs) attached along the vertical sides ``x = +-alpha``.
As ``t`` varies the wings translate rigidly outward at speed ``d(alpha)/dt =
pi/2`` while the rectangle stretches, so the boundary's normal velocity is
``(pi/2) * side * n_x`` on wing pieces and zero on the horizontal sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bumps import quartic_bump, quartic_bump_antiderivative, quartic_bump_integral
from .errors import BoundaryPointError, GeometryError

BETA = math.pi / 2.0         # rectangle half-height, fixed for the whole family
WING_SPEED = math.pi / 2.0   # d(alpha)/dt: rigid wing translation speed
# The stretch flow x -> x + (t-1)*FLOW_SCALE*Phi(x) must move the wing
# attachment lines at WING_SPEED, so the transport profile integrates to
# FLOW_SCALE when Phi is normalized to total mass 1.
FLOW_SCALE = math.pi

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet, Neumann or Robin (d_n u = b u on flat pieces)."""

    kind: str
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise GeometryError(f"unknown boundary condition {self.kind!r}")
        if self.kind != "robin" and self.b != 0.0:
            raise GeometryError("constant b only meaningful for Robin")


DIRICHLET = BoundaryCondition("dirichlet")
NEUMANN = BoundaryCondition("neumann")


def robin(b: float) -> BoundaryCondition:
    return BoundaryCondition("robin", float(b))


# ---------------------------------------------------------------------------
# boundary pieces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float
    side: int = 0        # +-1 for wing pieces (rigid translation), 0 fixed
    label: str = "segment"

    @property
    def length(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def points(self, u):
        u = np.asarray(u, dtype=float)
        return self.x0 + u * (self.x1 - self.x0), self.y0 + u * (self.y1 - self.y0)

    def normals(self, u):
        # boundary is traversed counterclockwise: outward normal is the
        # tangent rotated by -90 degrees
        L = self.length
        tx, ty = (self.x1 - self.x0) / L, (self.y1 - self.y0) / L
        u = np.asarray(u, dtype=float)
        ones = np.ones_like(u)
        return ty * ones, -tx * ones

    def translated(self, dxs):
        return replace(self, x0=self.x0 + dxs, x1=self.x1 + dxs)

    def mirrored(self):
        # mirror about x=0 and reverse traversal to keep CCW orientation
        return Segment(-self.x1, self.y1, -self.x0, self.y0,
                       side=-self.side, label=self.label + "-mirror")


@dataclass(frozen=True)
class Arc:
    cx: float
    cy: float
    radius: float
    angle0: float
    angle1: float        # traversal from angle0 to angle1 (either direction)
    side: int = 0
    label: str = "arc"

    @property
    def length(self):
        return self.radius * abs(self.angle1 - self.angle0)

    def _angles(self, u):
        u = np.asarray(u, dtype=float)
        return self.angle0 + u * (self.angle1 - self.angle0)

    def points(self, u):
        a = self._angles(u)
        return self.cx + self.radius * np.cos(a), self.cy + self.radius * np.sin(a)

    def normals(self, u):
        a = self._angles(u)
        sgn = 1.0 if self.angle1 > self.angle0 else -1.0
        return sgn * np.cos(a), sgn * np.sin(a)

    def translated(self, dxs):
        return replace(self, cx=self.cx + dxs)

    def mirrored(self):
        return Arc(-self.cx, self.cy, self.radius,
                   math.pi - self.angle1, math.pi - self.angle0,
                   side=-self.side, label=self.label + "-mirror")

    def contains_angle(self, theta, tol=1e-12):
        lo, hi = sorted((self.angle0, self.angle1))
        span = hi - lo
        d = np.mod(np.asarray(theta, dtype=float) - lo, _TWO_PI)
        return (d <= span + tol) | (d >= _TWO_PI - tol)


# ---------------------------------------------------------------------------
# domain specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """A partially rectangular domain at aspect parameter ``t``."""

    kind: str                       # 'stadium' | 'rectangle' | 'generic'
    t: float
    bc: BoundaryCondition
    alpha: float
    beta: float
    pieces: tuple
    wing_template: tuple = ()       # generic wings at t=1 (serialization)

    def __post_init__(self):
        if abs(self.alpha - self.t * self.beta) > 1e-12:
            raise GeometryError("alpha must equal t*beta exactly")
        _check_closed(self.pieces)

    @property
    def n_pieces(self):
        return len(self.pieces)

    def area(self):
        """Enclosed area via Green's theorem, exact per piece."""
        total = 0.0
        for p in self.pieces:
            if isinstance(p, Segment):
                total += 0.5 * (p.x0 * p.y1 - p.x1 * p.y0)
            else:
                a0, a1 = p.angle0, p.angle1
                total += 0.5 * (p.radius**2 * (a1 - a0)
                                + p.cx * p.radius * (math.sin(a1) - math.sin(a0))
                                - p.cy * p.radius * (math.cos(a1) - math.cos(a0)))
        return total

    def perimeter(self):
        return sum(p.length for p in self.pieces)

    def with_bc(self, bc: BoundaryCondition) -> "DomainSpec":
        return replace(self, bc=bc)

    def at_parameter(self, t: float) -> "DomainSpec":
        """Same family member at a different aspect parameter."""
        if self.kind == "stadium":
            return make_stadium(t, bc=self.bc)
        if self.kind == "rectangle":
            return make_rectangle(t, bc=self.bc)
        return make_partially_rectangular(t, self.wing_template[0],
                                          self.wing_template[1], bc=self.bc)


def _check_closed(pieces, tol=1e-9):
    if not pieces:
        raise GeometryError("domain boundary has no pieces")
    for p in pieces:
        if p.length <= tol:
            raise GeometryError(f"zero-length boundary piece {p.label!r}")
    for a, b in zip(pieces, pieces[1:] + (pieces[0],)):
        ax, ay = a.points(1.0)
        bx, by = b.points(0.0)
        if math.hypot(float(ax) - float(bx), float(ay) - float(by)) > tol:
            raise GeometryError(
                f"boundary not closed between {a.label!r} and {b.label!r}")


def _validate_t(t):
    t = float(t)
    if not 1.0 <= t <= 2.0:
        raise GeometryError(f"aspect parameter t={t} outside [1, 2]")
    return t


def make_stadium(t, bc: BoundaryCondition = DIRICHLET) -> DomainSpec:
    """Stadium: rectangle plus half-discs of radius beta at x = +-alpha."""
    t = _validate_t(t)
    a, b = t * BETA, BETA
    pieces = (
        Segment(-a, -b, a, -b, side=0, label="bottom"),
        Arc(a, 0.0, b, -math.pi / 2, math.pi / 2, side=+1, label="right-cap"),
        Segment(a, b, -a, b, side=0, label="top"),
        Arc(-a, 0.0, b, math.pi / 2, 3 * math.pi / 2, side=-1, label="left-cap"),
    )
    return DomainSpec("stadium", t, bc, a, b, pieces)


def make_rectangle(t, bc: BoundaryCondition = DIRICHLET) -> DomainSpec:
    """Rectangle-only member (separable oracle domain)."""
    t = _validate_t(t)
    a, b = t * BETA, BETA
    pieces = (
        Segment(-a, -b, a, -b, side=0, label="bottom"),
        Segment(a, -b, a, b, side=+1, label="right-side"),
        Segment(a, b, -a, b, side=0, label="top"),
        Segment(-a, b, -a, -b, side=-1, label="left-side"),
    )
    return DomainSpec("rectangle", t, bc, a, b, pieces)


def make_partially_rectangular(t, right_wing, left_wing=None,
                               bc: BoundaryCondition = DIRICHLET) -> DomainSpec:
    """Generic member: wings given as CCW piece chains in their t=1 position.

    The right wing must run from ``(pi/2, -beta)`` to ``(pi/2, beta)``; the
    left wing from ``(-pi/2, beta)`` to ``(-pi/2, -beta)``.  ``left_wing=None``
    mirrors the right wing.  At parameter ``t`` each wing is translated
    rigidly by ``(t-1)*pi/2`` in its outward direction.
    """
    t = _validate_t(t)
    a, b = t * BETA, BETA
    right = tuple(replace(p, side=+1) if p.side == 0 else p for p in right_wing)
    if left_wing is None:
        left = tuple(p.mirrored() for p in reversed(right))
    else:
        left = tuple(replace(p, side=-1) if p.side == 0 else p for p in left_wing)
    shift = (t - 1.0) * WING_SPEED
    right_t = tuple(p.translated(+shift) for p in right)
    left_t = tuple(p.translated(-shift) for p in left)
    for p in right_t + left_t:
        for u in np.linspace(0.0, 1.0, 17):
            px, _ = p.points(u)
            if p.side * float(px) < a - 1e-9:
                raise GeometryError(
                    f"wing piece {p.label!r} crosses inside x = +-alpha")
    pieces = (
        (Segment(-a, -b, a, -b, side=0, label="bottom"),)
        + right_t
        + (Segment(a, b, -a, b, side=0, label="top"),)
        + left_t
    )
    return DomainSpec("generic", t, bc, a, b, pieces,
                      wing_template=(right, left))


def stadium_area(t):
    """Closed form: rectangle t*pi^2 plus a full disc pi^3/4."""
    return t * math.pi**2 + math.pi**3 / 4.0


def stadium_perimeter(t):
    return 2.0 * t * math.pi + math.pi**2


# ---------------------------------------------------------------------------
# boundary trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryTrace:
    """Quadrature samples along the boundary, ordered counterclockwise."""

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray        # arclength of each sample
    nx: np.ndarray       # outward unit normal
    ny: np.ndarray
    w: np.ndarray        # composite midpoint weights, sum == perimeter
    piece: np.ndarray    # index into spec.pieces
    side: np.ndarray     # per-sample wing translation sign
    curvature: np.ndarray  # signed boundary curvature (+ convex, - concave)
    perimeter: float

    @property
    def n(self):
        return self.x.size


def boundary_trace(spec: DomainSpec, n_samples: int) -> BoundaryTrace:
    """Sample the boundary with composite midpoint weights per piece."""
    if n_samples < 64:
        raise GeometryError("boundary trace needs at least 64 samples")
    P = spec.perimeter()
    counts = [max(2, int(round(n_samples * p.length / P))) for p in spec.pieces]
    xs, ys, ss, nxs, nys, ws, pcs, sds, kvs = [], [], [], [], [], [], [], [], []
    s_off = 0.0
    for k, (p, m) in enumerate(zip(spec.pieces, counts)):
        u = (np.arange(m) + 0.5) / m
        px, py = p.points(u)
        nx, ny = p.normals(u)
        if isinstance(p, Arc):
            kappa = (1.0 if p.angle1 > p.angle0 else -1.0) / p.radius
        else:
            kappa = 0.0
        xs.append(px)
        ys.append(py)
        ss.append(s_off + u * p.length)
        nxs.append(nx)
        nys.append(ny)
        ws.append(np.full(m, p.length / m))
        pcs.append(np.full(m, k, dtype=np.int32))
        sds.append(np.full(m, p.side, dtype=np.int8))
        kvs.append(np.full(m, kappa))
        s_off += p.length
    return BoundaryTrace(
        x=np.concatenate(xs), y=np.concatenate(ys), s=np.concatenate(ss),
        nx=np.concatenate(nxs), ny=np.concatenate(nys), w=np.concatenate(ws),
        piece=np.concatenate(pcs), side=np.concatenate(sds),
        curvature=np.concatenate(kvs), perimeter=P)


def normal_velocity(spec: DomainSpec, trace: BoundaryTrace) -> np.ndarray:
    """Boundary normal velocity under the t-flow at each trace sample.

    Wings translate rigidly at WING_SPEED, so the velocity is
    ``WING_SPEED * side * n_x``; it vanishes on the horizontal sides and is
    nonnegative everywhere.
    """
    rho = WING_SPEED * trace.side * trace.nx
    if rho.min() < -1e-9:
        raise GeometryError("normal velocity came out negative; bad wing chain")
    return np.maximum(rho, 0.0)


def normal_velocity_at(spec: DomainSpec, x: float, y: float) -> float:
    """Normal velocity at a single boundary point (rejects off-boundary)."""
    d, k, nx, _ = _nearest_piece(spec, float(x), float(y))
    if d > 1e-8:
        raise BoundaryPointError(f"point ({x}, {y}) is not on the boundary")
    p = spec.pieces[k]
    return max(WING_SPEED * p.side * nx, 0.0)


def _nearest_piece(spec, x, y):
    best = (math.inf, -1, 0.0, 0.0)
    for k, p in enumerate(spec.pieces):
        if isinstance(p, Segment):
            vx, vy = p.x1 - p.x0, p.y1 - p.y0
            L2 = vx * vx + vy * vy
            u = min(1.0, max(0.0, ((x - p.x0) * vx + (y - p.y0) * vy) / L2))
            px, py = p.x0 + u * vx, p.y0 + u * vy
            d = math.hypot(x - px, y - py)
            if d < best[0]:
                nx, ny = p.normals(u)
                best = (d, k, float(nx), float(ny))
        else:
            theta = math.atan2(y - p.cy, x - p.cx)
            if p.contains_angle(theta):
                d = abs(math.hypot(x - p.cx, y - p.cy) - p.radius)
                if d < best[0]:
                    sgn = 1.0 if p.angle1 > p.angle0 else -1.0
                    best = (d, k, sgn * math.cos(theta), sgn * math.sin(theta))
    return best


# ---------------------------------------------------------------------------
# point classification and axis-aligned boundary cuts
# ---------------------------------------------------------------------------

def inside_points(spec: DomainSpec, x, y, tol=1e-12):
    """Strict interior test, vectorized over points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = spec.alpha, spec.beta
    in_rect = (np.abs(x) < a - tol) & (np.abs(y) < b - tol)
    if spec.kind == "rectangle":
        return in_rect
    if spec.kind == "stadium":
        r2 = (b - tol) ** 2
        right = (x - a) ** 2 + y**2 < r2
        left = (x + a) ** 2 + y**2 < r2
        return in_rect | right | left
    inside = in_rect.copy()
    # interface segments x = +-alpha are interior to the union, not boundary
    on_attach = (np.abs(np.abs(x) - a) <= 1e-12) & (np.abs(y) < b - tol)
    inside |= on_attach
    for sgn in (+1, -1):
        wing = [p for p in spec.pieces if p.side == sgn]
        loop = list(wing)
        x0, y0 = wing[-1].points(1.0)
        x1, y1 = wing[0].points(0.0)
        loop.append(Segment(float(x0), float(y0), float(x1), float(y1),
                            side=sgn, label="closure"))
        sel = (sgn * x > a + 1e-12) & ~inside
        if np.any(sel):
            inside_wing = _even_odd(loop, x[sel], y[sel])
            inside[sel] |= inside_wing
    return inside


# fixed irrational-slope ray direction: avoids axis tangencies of lattice
# points against axis-aligned segments and arc apexes
_RAY = (math.cos(0.5477), math.sin(0.5477))


def _even_odd(loop, x, y):
    crossings = np.zeros(x.shape, dtype=np.int64)
    ex, ey = _RAY
    for p in loop:
        for s in _ray_piece_hits(p, x, y, ex, ey):
            crossings += (np.isfinite(s) & (s > 1e-12)).astype(np.int64)
    return (crossings % 2) == 1


def _ray_piece_hits(p, x, y, ex, ey, smax=None):
    """Parameters s>0 where (x,y)+s*(ex,ey) meets the piece (inf when none)."""
    if isinstance(p, Segment):
        vx, vy = p.x1 - p.x0, p.y1 - p.y0
        den = ex * vy - ey * vx
        if abs(den) < 1e-15:
            return [np.full(x.shape, np.inf)]
        rx, ry = p.x0 - x, p.y0 - y
        s = (rx * vy - ry * vx) / den
        u = (rx * ey - ry * ex) / den
        ok = (u >= -1e-12) & (u <= 1.0 + 1e-12) & (s > 0)
        return [np.where(ok, s, np.inf)]
    dx0, dy0 = x - p.cx, y - p.cy
    bq = dx0 * ex + dy0 * ey
    cq = dx0 * dx0 + dy0 * dy0 - p.radius**2
    disc = bq * bq - cq
    hits = []
    with np.errstate(invalid="ignore"):
        root = np.sqrt(np.maximum(disc, 0.0))
        for sgn in (-1.0, 1.0):
            s = -bq + sgn * root
            px, py = x + s * ex, y + s * ey
            theta = np.arctan2(py - p.cy, px - p.cx)
            ok = (disc > 0) & (s > 0) & p.contains_angle(theta)
            hits.append(np.where(ok, s, np.inf))
    return hits


def boundary_cut_lengths(spec: DomainSpec, x, y, ex, ey, smax):
    """Distance along (ex, ey) from interior points to the boundary.

    Used for Shortley-Weller cut fractions: the first boundary crossing
    within ``smax`` (inf if the ray stays inside that far).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best = np.full(x.shape, np.inf)
    for p in spec.pieces:
        for s in _ray_piece_hits(p, x, y, ex, ey):
            np.minimum(best, s, out=best)
    return np.where(best <= smax * (1.0 + 1e-9), best, np.inf)


def inside_interval_length(spec: DomainSpec, x, y, ex, ey, smax):
    """Measure of ``{s in [0, smax] : (x,y) + s (ex,ey) inside the domain}``.

    Exact up to the piece intersections; robust when the base point itself
    is outside (the leading gap is skipped).  This is what cut-cell face
    apertures and cell volumes are built from.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hits = []
    for p in spec.pieces:
        hits.extend(_ray_piece_hits(p, x, y, ex, ey))
    H = np.stack(hits, axis=-1)
    H = np.where(np.isfinite(H) & (H > 1e-12), H, np.inf)
    H = np.sort(H, axis=-1)
    state = inside_points(spec, x, y)
    total = np.zeros(np.shape(x))
    prev = np.zeros(np.shape(x))
    for k in range(H.shape[-1]):
        s = np.clip(H[..., k], 0.0, smax)
        s = np.maximum(s, prev)
        total += np.where(state, s - prev, 0.0)
        prev = s
        state = np.where(H[..., k] < smax, ~state, state)
    total += np.where(state, smax - prev, 0.0)
    return total


def distance_to_boundary(spec: DomainSpec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best = np.full(x.shape, np.inf)
    for p in spec.pieces:
        if isinstance(p, Segment):
            vx, vy = p.x1 - p.x0, p.y1 - p.y0
            L2 = vx * vx + vy * vy
            u = np.clip(((x - p.x0) * vx + (y - p.y0) * vy) / L2, 0.0, 1.0)
            d = np.hypot(x - (p.x0 + u * vx), y - (p.y0 + u * vy))
        else:
            theta = np.arctan2(y - p.cy, x - p.cx)
            rad = np.hypot(x - p.cx, y - p.cy)
            d = np.where(p.contains_angle(theta), np.abs(rad - p.radius), np.inf)
            for uend in (0.0, 1.0):
                qx, qy = p.points(uend)
                d = np.minimum(d, np.hypot(x - qx, y - qy))
        np.minimum(best, d, out=best)
    return best


# ---------------------------------------------------------------------------
# stretch-flow transport profile
# ---------------------------------------------------------------------------

PROFILE_RADIUS = math.pi / 4.0
# unit-mass normalization of the quartic bump on [-pi/4, pi/4]
_UNIT_C = 1.0 / quartic_bump_integral(PROFILE_RADIUS)


def _unit_bump(x, radius):
    c = 1.0 / quartic_bump_integral(radius)
    f, d1, d2 = quartic_bump(x, radius)
    return c * f, c * d1, c * d2


def flow_map(x, t, radius=PROFILE_RADIUS):
    """The coordinate stretch x -> x + (t-1)*FLOW_SCALE*Phi(x).

    Phi is the odd unit-mass antiderivative of the transport bump, so the
    map is the identity near 0, translates the region beyond the bump by
    +-(t-1)*pi/2, and carries the reference rectangle onto the one at t.
    """
    x = np.asarray(x, dtype=float)
    c = 1.0 / quartic_bump_integral(radius)
    return x + (t - 1.0) * FLOW_SCALE * c * quartic_bump_antiderivative(x, radius)


def flow_map_inverse(x, t, radius=PROFILE_RADIUS):
    """Invert the stretch map by Newton iteration (monotone, safe)."""
    x = np.asarray(x, dtype=float)
    shift = (t - 1.0) * WING_SPEED
    xi = np.clip(x, -radius - shift, radius + shift) * radius / (radius + shift)
    c = 1.0 / quartic_bump_integral(radius)
    for _ in range(60):
        f = quartic_bump(xi, radius)[0]
        F = xi + (t - 1.0) * FLOW_SCALE * c * quartic_bump_antiderivative(xi, radius) - x
        dF = 1.0 + (t - 1.0) * FLOW_SCALE * c * f
        step = F / dF
        xi = xi - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return xi


def stretch_profile(x, t, radius=PROFILE_RADIUS):
    """Pushforward transport profile on the physical domain at parameter t.

    Returns ``(value, d/dx, d2/dx2)`` with unit integral for every t.  The
    per-unit-t flow convention multiplies this by FLOW_SCALE wherever an
    eigenvalue rate is computed.
    """
    x = np.asarray(x, dtype=float)
    if abs(t - 1.0) < 1e-14:
        return _unit_bump(x, radius)
    xi = flow_map_inverse(x, t, radius)
    f, f1, f2 = _unit_bump(xi, radius)
    k = (t - 1.0) * FLOW_SCALE
    rho = 1.0 + k * f
    rho1 = k * f1
    rho2 = k * f2
    psi = f / rho
    psi1 = f1 / rho - f * rho1 / rho**2
    psi2 = (f2 / rho - 2.0 * f1 * rho1 / rho**2
            + 2.0 * f * rho1**2 / rho**3 - f * rho2 / rho**2)
    val = psi
    d1 = psi1 / rho
    d2 = (psi2 * rho - psi1 * rho1) / rho**3
    return val, d1, d2


def stretch_support_radius(t, radius=PROFILE_RADIUS):
    """Support half-width of the pushforward profile at parameter t."""
    return radius + (t - 1.0) * WING_SPEED
