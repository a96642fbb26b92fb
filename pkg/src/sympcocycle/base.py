"""Hyperbolic base systems, roof functions, and the suspension flow.

Two concrete invertible bases are provided: the Arnold cat map on the
2-torus (with exact arithmetic for periodic and heteroclinic points)
and a truncated two-sided full shift.  Roof functions are bounded below
by one; the suspension flow moves points vertically at unit speed and
glues (x, roof(x)) to (f(x), 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    InvalidDimensionError,
    PreconditionError,
    ResourceLimitError,
    SearchFailureError,
    TruncationError,
)
from .exactnum import QuadraticNumber, mod1

__all__ = [
    "CAT_MATRIX",
    "CAT_EXPANSION",
    "TorusPoint",
    "ShiftPoint",
    "CatMap",
    "FullShift",
    "ConstantRoof",
    "CosineBumpRoof",
    "SuspensionPoint",
    "PeriodicOrbit",
    "base_apply",
    "roof_sum",
    "suspend_flow",
    "periodic_points_catmap",
    "heteroclinic_point_catmap",
    "roof_integral",
]

CAT_MATRIX = np.array([[2, 1], [1, 1]], dtype=np.int64)
CAT_MATRIX_INV = np.array([[1, -1], [-1, 2]], dtype=np.int64)
#: Expanding eigenvalue (3 + sqrt(5))/2 of the cat-map matrix.
CAT_EXPANSION = (3.0 + math.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------------
# base points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusPoint:
    """A point of the 2-torus; coordinates are float, Fraction, or
    QuadraticNumber and always reduced into [0, 1)."""

    u: object
    v: object

    def coords(self):
        return float(self.u) % 1.0, float(self.v) % 1.0

    @property
    def exact(self):
        return not (isinstance(self.u, float) or isinstance(self.v, float))


@dataclass(frozen=True)
class ShiftPoint:
    """A finite window of a two-sided symbol sequence.

    ``window[i]`` is the symbol at absolute index ``i - center``; the
    usable margin shrinks as the shift is applied.
    """

    window: tuple
    center: int

    def symbol(self, n):
        i = self.center + n
        if i < 0 or i >= len(self.window):
            raise TruncationError(f"symbol index {n} outside the stored window")
        return self.window[i]

    @property
    def left_margin(self):
        return self.center

    @property
    def right_margin(self):
        return len(self.window) - 1 - self.center


# ---------------------------------------------------------------------------
# base systems
# ---------------------------------------------------------------------------


class CatMap:
    """The hyperbolic automorphism x -> [[2,1],[1,1]] x mod 1.

    Exact when the point carries exact coordinates.  The metric is the
    wrapped Euclidean distance; the per-iterate hyperbolicity rate is
    log((3 + sqrt(5))/2).
    """

    kind = "catmap"

    def apply(self, x: TorusPoint, n: int = 1) -> TorusPoint:
        u, v = x.u, x.v
        if n >= 0:
            for _ in range(n):
                u, v = mod1(2 * u + v), mod1(u + v)
        else:
            for _ in range(-n):
                u, v = mod1(u - v), mod1(-u + 2 * v)
        return TorusPoint(u, v)

    def distance(self, x: TorusPoint, y: TorusPoint) -> float:
        xu, xv = x.coords()
        yu, yv = y.coords()
        du = abs(xu - yu)
        dv = abs(xv - yv)
        du = min(du, 1.0 - du)
        dv = min(dv, 1.0 - dv)
        return math.hypot(du, dv)

    def coords(self, x: TorusPoint):
        return x.coords()

    @property
    def hyperbolicity_rate(self):
        return math.log(CAT_EXPANSION)

    def random_point(self, rng) -> TorusPoint:
        u, v = rng.random(2)
        return TorusPoint(float(u), float(v))


class FullShift:
    """Truncated two-sided full shift on ``symbols`` symbols.

    Distance is 2^(-m) where m is the first index (by absolute value)
    at which two windows differ; windows default to 64 symbols on each
    side, below float resolution of the metric.
    """

    kind = "fullshift"

    def __init__(self, symbols: int = 2, depth: int = 64):
        if symbols < 2:
            raise InvalidDimensionError("a full shift needs at least two symbols")
        self.symbols = int(symbols)
        self.depth = int(depth)

    def make_point(self, symbols_seq, center=None) -> ShiftPoint:
        w = tuple(int(s) for s in symbols_seq)
        if any(s < 0 or s >= self.symbols for s in w):
            raise PreconditionError("symbol out of range")
        return ShiftPoint(window=w, center=len(w) // 2 if center is None else center)

    def apply(self, x: ShiftPoint, n: int = 1) -> ShiftPoint:
        c = x.center + n
        if c < 0 or c >= len(x.window):
            raise TruncationError(
                f"shift by {n} exhausts the stored window (margins "
                f"{x.left_margin}/{x.right_margin})"
            )
        return ShiftPoint(window=x.window, center=c)

    def distance(self, x: ShiftPoint, y: ShiftPoint) -> float:
        reach = min(x.left_margin, y.left_margin, x.right_margin, y.right_margin)
        for m in range(reach + 1):
            if x.symbol(m) != y.symbol(m) or x.symbol(-m) != y.symbol(-m):
                return 2.0 ** (-m)
        return 2.0 ** (-(reach + 1))

    def coords(self, x: ShiftPoint):
        """Embed into [0,1)^2 via base-k expansions of the two half
        sequences; Lipschitz with constant 1 for the shift metric."""
        k = self.symbols
        reach_f = min(x.right_margin, 48)
        reach_b = min(x.left_margin, 48)
        u = 0.0
        for n in range(reach_f, -1, -1):
            u = (u + x.symbol(n)) / k
        v = 0.0
        for n in range(reach_b, 0, -1):
            v = (v + x.symbol(-n)) / k
        return u, v

    @property
    def hyperbolicity_rate(self):
        return math.log(2.0)

    def random_point(self, rng) -> ShiftPoint:
        w = rng.integers(0, self.symbols, size=2 * self.depth + 1)
        return ShiftPoint(window=tuple(int(s) for s in w), center=self.depth)


def base_apply(sys, x, n: int):
    """n-th iterate of the base map; exact for exact cat-map points."""
    return sys.apply(x, n)


# ---------------------------------------------------------------------------
# roof functions
# ---------------------------------------------------------------------------


class ConstantRoof:
    """roof(x) = c with c >= 1."""

    kind = "constant"
    is_constant = True

    def __init__(self, c: float):
        c = float(c)
        if c < 1.0:
            raise PreconditionError(f"roof must be >= 1 everywhere, got constant {c}")
        self.c = c
        self.minimum = c
        self.maximum = c
        self.lipschitz = 0.0

    def value(self, sys, x) -> float:
        return self.c

    def mean(self):
        return self.c


class CosineBumpRoof:
    """roof(u, v) = c0 + a cos(2 pi u), bounded below by c0 - |a| >= 1.

    The bump has zero mean against Lebesgue measure, so the exact
    integral is c0.  On shift bases the embedded u-coordinate is used,
    keeping the same Lipschitz budget.
    """

    kind = "cosine"
    is_constant = False

    def __init__(self, c0: float, a: float):
        c0, a = float(c0), float(a)
        if c0 - abs(a) < 1.0:
            raise PreconditionError(f"roof minimum {c0 - abs(a)} is below 1")
        self.c0 = c0
        self.a = a
        self.minimum = c0 - abs(a)
        self.maximum = c0 + abs(a)
        self.lipschitz = 2.0 * math.pi * abs(a)

    def value(self, sys, x) -> float:
        u, _ = sys.coords(x)
        return self.c0 + self.a * math.cos(2.0 * math.pi * u)

    def mean(self):
        return self.c0


def roof_sum(roof, sys, x, n: int) -> float:
    """Birkhoff sum of the roof along the forward orbit of length n >= 1."""
    if n < 1:
        raise PreconditionError(f"need n >= 1, got {n}")
    total = 0.0
    pt = x
    for _ in range(n):
        total += roof.value(sys, pt)
        pt = sys.apply(pt, 1)
    return total


# ---------------------------------------------------------------------------
# suspension flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuspensionPoint:
    """A point (base, height) with 0 <= height < roof(base)."""

    base: object
    height: float


def suspend_flow(sys, roof, pt: SuspensionPoint, t: float) -> SuspensionPoint:
    """Flow for time t (either sign), applying the roof quotient."""
    x = pt.base
    s = pt.height + float(t)
    r = roof.value(sys, x)
    while s >= r:
        s -= r
        x = sys.apply(x, 1)
        r = roof.value(sys, x)
    while s < 0.0:
        x = sys.apply(x, -1)
        r = roof.value(sys, x)
        s += r
    return SuspensionPoint(base=x, height=s)


# ---------------------------------------------------------------------------
# periodic and heteroclinic points of the cat map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic base point with its minimal period and flow period."""

    point: object
    period: int
    flow_period: float


def _int_matpow(A, n):
    out = np.eye(2, dtype=object)
    P = np.array([[int(A[0, 0]), int(A[0, 1])], [int(A[1, 0]), int(A[1, 1])]], dtype=object)
    for _ in range(n):
        out = out @ P
    return out


def _smith_normal_form_2x2(M):
    """Smith normal form M = U D V over the integers (2x2)."""
    M = [[int(M[0][0]), int(M[0][1])], [int(M[1][0]), int(M[1][1])]]
    U = [[1, 0], [0, 1]]
    V = [[1, 0], [0, 1]]

    def swap_rows(X):
        X[0], X[1] = X[1], X[0]

    def swap_cols(X):
        for r in X:
            r[0], r[1] = r[1], r[0]

    def row_op(X, k):  # row1 -= k * row0
        X[1][0] -= k * X[0][0]
        X[1][1] -= k * X[0][1]

    def col_op(X, k):  # col1 -= k * col0
        X[0][1] -= k * X[0][0]
        X[1][1] -= k * X[1][0]

    # U_inv and V_inv are accumulated so that M = U D V at the end.
    Uinv = [[1, 0], [0, 1]]
    Vinv = [[1, 0], [0, 1]]
    A = M
    while True:
        if A[0][0] == 0:
            if A[1][0] != 0:
                swap_rows(A)
                swap_rows(Uinv)
            elif A[0][1] != 0:
                swap_cols(A)
                swap_cols(Vinv)
            elif A[1][1] != 0:
                swap_rows(A)
                swap_rows(Uinv)
                swap_cols(A)
                swap_cols(Vinv)
            else:
                break
            continue
        k = A[1][0] // A[0][0]
        if A[1][0] % A[0][0] != 0 or k != 0:
            row_op(A, k)
            row_op(Uinv, k)
            if A[1][0] != 0:
                swap_rows(A)
                swap_rows(Uinv)
                continue
        if A[1][0] != 0:
            continue
        k = A[0][1] // A[0][0]
        if A[0][1] % A[0][0] != 0 or k != 0:
            col_op(A, k)
            col_op(Vinv, k)
            if A[0][1] != 0:
                swap_cols(A)
                swap_cols(Vinv)
                continue
        if A[0][1] != 0:
            continue
        break
    return A, Uinv, Vinv


def periodic_points_catmap(period: int, roof=None, sys=None):
    """All fixed points of the period-th cat-map iterate, exactly.

    The count equals trace(A^period) - 2.  Each point is returned as a
    PeriodicOrbit carrying its minimal period; ``flow_period`` is the
    roof sum over one minimal period (or the minimal period itself when
    no roof is given).
    """
    if period < 1:
        raise PreconditionError("period must be >= 1")
    if period > 12:
        raise ResourceLimitError(f"period {period} exceeds the guard (count grows like 2.6^n)")
    sys = sys or CatMap()
    An = _int_matpow(CAT_MATRIX, period)
    M = [[An[0, 0] - 1, An[0, 1]], [An[1, 0], An[1, 1] - 1]]
    D, Uinv, Vinv = _smith_normal_form_2x2(M)
    d1, d2 = abs(D[0][0]), abs(D[1][1])
    count = d1 * d2
    # solutions are x = Vinv * (i/d1, j/d2) mod 1 for all residue pairs
    pts = []
    seen = set()
    for i in range(d1):
        for j in range(d2):
            a = Fraction(i, d1) if d1 else Fraction(0)
            b = Fraction(j, d2) if d2 else Fraction(0)
            u = mod1(Vinv[0][0] * a + Vinv[0][1] * b)
            v = mod1(Vinv[1][0] * a + Vinv[1][1] * b)
            if (u, v) in seen:
                continue
            seen.add((u, v))
            pts.append(TorusPoint(u, v))
    if len(pts) != count:
        raise SearchFailureError(
            f"enumeration produced {len(pts)} points, lattice theory predicts {count}"
        )
    orbits = []
    for p in pts:
        q = p
        minimal = period
        for k in range(1, period + 1):
            q = sys.apply(q, 1)
            if q == p:
                minimal = k
                break
        if roof is None:
            fp = float(minimal)
        else:
            fp = roof_sum(roof, sys, p, minimal)
        orbits.append(PeriodicOrbit(point=p, period=minimal, flow_period=fp))
    return orbits


def _unstable_stable_directions():
    """Exact eigendirections of the cat-map matrix in Q(sqrt(5)).

    Unstable: (1, (sqrt(5)-1)/2); stable: (1, -(1+sqrt(5))/2).
    """
    half = Fraction(1, 2)
    vu = (QuadraticNumber(1), QuadraticNumber(-half, half))
    vs = (QuadraticNumber(1), QuadraticNumber(-half, -half))
    return vu, vs


def heteroclinic_point_catmap(p: PeriodicOrbit, q: PeriodicOrbit, search: int = 2,
                              verify_iters: int = 30, verify_tol: float = 1e-6):
    """A transverse intersection point of W^u(p) and W^s(q), exactly.

    Solves t*vu - s*vs = (q - p) + w over Q(sqrt(5)) for integer offsets
    w, keeping the solution with the smallest |t| + |s| among those with
    t != 0 and s != 0, and verifies forward convergence to the orbit of
    q and backward convergence to the orbit of p.  p = q yields a
    homoclinic point.
    """
    sys = CatMap()
    vu, vs = _unstable_stable_directions()
    px, py = QuadraticNumber(Fraction(p.point.u)), QuadraticNumber(Fraction(p.point.v))
    qx, qy = QuadraticNumber(Fraction(q.point.u)), QuadraticNumber(Fraction(q.point.v))
    det = vu[0] * (-vs[1]) - (-vs[0]) * vu[1]
    candidates = []
    for w1 in range(-search, search + 1):
        for w2 in range(-search, search + 1):
            r1 = qx - px + w1
            r2 = qy - py + w2
            # Cramer for [vu, -vs] [t, s]^T = r
            t = (r1 * (-vs[1]) - (-vs[0]) * r2) / det
            s = (vu[0] * r2 - r1 * vu[1]) / det
            if t == 0 or s == 0:
                continue
            size = abs(float(t)) + abs(float(s))
            zu = (px + t * vu[0]).mod1()
            zv = (py + t * vu[1]).mod1()
            candidates.append((size, w1, w2, TorusPoint(zu, zv)))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    lam = CAT_EXPANSION
    for _, _, _, z in candidates:
        fwd = z
        fq = q.point
        ok = True
        for n in range(1, verify_iters + 1):
            fwd = sys.apply(fwd, 1)
            fq = sys.apply(fq, 1)
            if n == verify_iters and sys.distance(fwd, fq) > verify_tol:
                ok = False
        bwd = z
        bp = p.point
        for n in range(1, verify_iters + 1):
            bwd = sys.apply(bwd, -1)
            bp = sys.apply(bp, -1)
            if n == verify_iters and sys.distance(bwd, bp) > verify_tol:
                ok = False
        if ok:
            return z
    raise SearchFailureError(
        "no admissible heteroclinic intersection in the searched lattice; enlarge `search`"
    )


# ---------------------------------------------------------------------------
# roof integral
# ---------------------------------------------------------------------------


def roof_integral(roof, sys, n_samples: int = 10000, seed=0):
    """Monte-Carlo estimate of the roof integral with standard error.

    The base invariant measure is Lebesgue for the cat map and the
    uniform Bernoulli measure for the full shift; constant roofs return
    (c, 0) exactly.
    """
    if n_samples < 1:
        raise PreconditionError("need n_samples >= 1")
    if roof.is_constant:
        return roof.c, 0.0
    rng = np.random.default_rng(seed)
    vals = np.empty(n_samples)
    for i in range(n_samples):
        vals[i] = roof.value(sys, sys.random_point(rng))
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return mean, stderr
