"""Stable/unstable holonomies of the return cocycle and their diagnostics.

A stable holonomy between leaf-mates a, b is the limit of
Psi^n(b)^{-1} Psi^n(a); it converges geometrically when the cocycle is
dominated by the base contraction (fiber bunching).  Non-convergence is
reported as data together with the domination margins, never as an
exception.  The unstable side mirrors everything under backward
iteration.

Atomic projective measures live at periodic points whose return matrix
has real simple spectrum; comparing their holonomy pushforwards is the
quantitative "rigidity" probe used by the perturbation experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .base import PeriodicOrbit
from .engine import DEFAULT_STEP, OrbitData, induced_factors, orbit_data
from .errors import PreconditionError, SpectrumDegeneracyError
from .symplectic import SympMatrix, opnorm, symplectic_defect, symplectic_inverse

__all__ = [
    "DominationParams",
    "Holonomy",
    "ProjectiveAtomMeasure",
    "domination_check",
    "stable_holonomy",
    "unstable_holonomy",
    "holonomy_axiom_check",
    "AxiomReport",
    "atomic_measure_at_periodic",
    "pushforward_compare",
    "projective_distance",
]


@dataclass(frozen=True)
class DominationParams:
    """Block length N, bunching rate theta, base rate tau, horizon k_max.

    The standing constraint 3*theta < tau is enforced at construction.
    """

    N: int = 1
    theta: float = 0.3
    tau: float = math.log((3.0 + math.sqrt(5.0)) / 2.0)
    k_max: int = 20

    def __post_init__(self):
        if self.N < 1 or self.k_max < 1:
            raise PreconditionError("N and k_max must be positive")
        if not 3.0 * self.theta < self.tau:
            raise PreconditionError(
                f"domination requires 3*theta < tau, got theta={self.theta}, tau={self.tau}"
            )


def domination_check(field, sys, roof, x, params: DominationParams, h=DEFAULT_STEP):
    """Product bound on ||Psi|| ||Psi^{-1}|| sampled every N iterates.

    Returns (ok, margins): margins[k-1] = k N theta - sum of log norm
    products up to k, nonnegative iff the bound holds at horizon k.
    """
    form = field.form
    pts = []
    pt = x
    for j in range(params.k_max):
        pts.append(pt)
        pt = sys.apply(pt, params.N)
    u = np.empty(params.k_max)
    v = np.empty(params.k_max)
    rho = np.empty(params.k_max)
    for j, p in enumerate(pts):
        u[j], v[j] = sys.coords(p)
        rho[j] = roof.value(sys, p)
    od = OrbitData(points=pts, u=u, v=v, rho=rho)
    factors = induced_factors(field, sys, roof, od, h)
    logs = np.empty(params.k_max)
    for j in range(params.k_max):
        logs[j] = math.log(opnorm(factors[j])) + math.log(
            opnorm(symplectic_inverse(factors[j], form))
        )
    margins = params.N * params.theta * np.arange(1, params.k_max + 1) - np.cumsum(logs)
    return bool(np.all(margins >= -1e-9)), margins


@dataclass(eq=False)
class Holonomy:
    """A fiber identification along a leaf, with its convergence record."""

    map: SympMatrix
    src: object
    dst: object
    side: str
    history: list
    converged: bool
    n_iters: int = 0
    domination_margins: np.ndarray = None


class _FactorCache:
    """Return-map factors along an orbit, batch-integrated on demand."""

    def __init__(self, field, sys, roof, x0, backward=False, h=DEFAULT_STEP):
        self.field, self.sys, self.roof, self.h = field, sys, roof, h
        self.backward = backward
        self.x0 = x0
        self.factors = np.empty((0, field.dim, field.dim))
        self.points = []

    def grow(self, n):
        if n <= len(self.factors):
            return
        n = max(n, 2 * len(self.factors), 16)
        if self.backward:
            # factors at f^{-1}x0, f^{-2}x0, ...
            start = self.sys.apply(self.x0, -1)
            orbit = orbit_data(self.sys, self.roof, start, n, backward=True)
        else:
            orbit = orbit_data(self.sys, self.roof, self.x0, n)
        self.points = orbit.points
        self.factors = induced_factors(self.field, self.sys, self.roof, orbit, self.h)

    def factor(self, j):
        self.grow(j + 1)
        return self.factors[j]

    def point(self, j):
        self.grow(j + 1)
        return self.points[j]


def _limit(num_cache, den_cache, form, n_max, tol, n_min=1):
    """Stable limit loop: L_n = [Psi^n(z)]^{-1} Psi^n(p), accumulated
    incrementally.

    ``n_min`` defers the convergence verdict until every localized
    perturbation along the orbit has entered the product (a constant
    cocycle otherwise converges instantly, before the insertion).
    """
    d = form.J.shape[0]
    A = np.eye(d)
    Binv = np.eye(d)
    L_prev = np.eye(d)
    history = []
    converged = False
    n_done = 0
    for n in range(n_max):
        A = num_cache.factor(n) @ A
        Binv = Binv @ symplectic_inverse(den_cache.factor(n), form)
        L = Binv @ A
        diff = float(np.linalg.norm(L - L_prev))
        history.append(diff)
        L_prev = L
        n_done = n + 1
        if diff < tol and n + 1 >= n_min:
            converged = True
            break
    return L_prev, history, converged, n_done


def _verify_on_leaf(sys, a, b, forward, n_check=30):
    """Orbits of leaf-mates must eventually approach each other (forward
    for stable leaves, backward for unstable).

    Leaf-mates far apart along the leaf (e.g. iterates of a homoclinic
    point) first drift through a transient, so only the horizon distance
    is gated: genuine pairs contract below the absolute floor, generic
    pairs stay order-one.
    """
    step = 1 if forward else -1
    d0 = sys.distance(a, b)
    if d0 == 0.0:
        return
    pa, pb = a, b
    for _ in range(n_check):
        pa = sys.apply(pa, step)
        pb = sys.apply(pb, step)
    d1 = sys.distance(pa, pb)
    if not d1 <= max(1e-6, 0.25 * d0):
        raise PreconditionError(
            f"points do not approach under {'forward' if forward else 'backward'} "
            f"iteration (d0={d0:.3e}, d{n_check}={d1:.3e}); not on a common "
            f"{'stable' if forward else 'unstable'} leaf"
        )


def stable_holonomy(field, sys, roof, p, z, n_max=60, tol=1e-9, h=DEFAULT_STEP,
                    params: DominationParams = None) -> Holonomy:
    """Limit of Psi^n(z)^{-1} Psi^n(p) for z on the stable leaf of p.

    ``p`` may be a PeriodicOrbit or a plain base point; ``n_max`` counts
    base iterates.  A non-converged limit is returned with
    converged=False and the domination margins attached.
    """
    p_pt = p.point if isinstance(p, PeriodicOrbit) else p
    form = field.form
    _verify_on_leaf(sys, p_pt, z, forward=True)
    rate = sys.hyperbolicity_rate
    params = params or DominationParams(tau=rate, theta=rate / 3.2)
    ok, margins = domination_check(field, sys, roof, p_pt, params, h)
    num = _FactorCache(field, sys, roof, p_pt, backward=False, h=h)
    den = _FactorCache(field, sys, roof, z, backward=False, h=h)
    L, history, converged, n_done = _limit(num, den, form, n_max, tol)
    return Holonomy(
        map=SympMatrix(ell=field.ell, mat=L, defect=symplectic_defect(L, form)),
        src=p_pt, dst=z, side="stable", history=history, converged=converged,
        n_iters=n_done, domination_margins=margins,
    )


def unstable_holonomy(field, sys, roof, p, z, n_max=60, tol=1e-9, h=DEFAULT_STEP,
                      params: DominationParams = None) -> Holonomy:
    """Mirror limit along backward iterates for z on the unstable leaf."""
    p_pt = p.point if isinstance(p, PeriodicOrbit) else p
    form = field.form
    _verify_on_leaf(sys, p_pt, z, forward=False)
    rate = sys.hyperbolicity_rate
    params = params or DominationParams(tau=rate, theta=rate / 3.2)
    ok, margins = domination_check(field, sys, roof, p_pt, params, h)
    num = _FactorCache(field, sys, roof, z, backward=True, h=h)
    den = _FactorCache(field, sys, roof, p_pt, backward=True, h=h)
    # L^u_{p,z} = lim Psi^n(f^{-n} z) [Psi^n(f^{-n} p)]^{-1}
    L, history, converged, n_done = _limit_unstable(num, den, form, n_max, tol)
    return Holonomy(
        map=SympMatrix(ell=field.ell, mat=L, defect=symplectic_defect(L, form)),
        src=p_pt, dst=z, side="unstable", history=history, converged=converged,
        n_iters=n_done, domination_margins=margins,
    )


def _limit_unstable(z_cache, p_cache, form, n_max, tol, n_min=1):
    """Unstable limit loop: L_n = Psi^n(f^{-n} z) [Psi^n(f^{-n} p)]^{-1}."""
    d = form.J.shape[0]
    N = np.eye(d)  # Psi^n(f^{-n} z) = Psi(f^{-1}z) ... Psi(f^{-n}z)
    Dinv = np.eye(d)  # its p-counterpart inverted: Psi(f^{-n}p)^{-1} ... Psi(f^{-1}p)^{-1}
    L_prev = np.eye(d)
    history = []
    converged = False
    n_done = 0
    for n in range(n_max):
        N = N @ z_cache.factor(n)
        Dinv = symplectic_inverse(p_cache.factor(n), form) @ Dinv
        L = N @ Dinv
        diff = float(np.linalg.norm(L - L_prev))
        history.append(diff)
        L_prev = L
        n_done = n + 1
        if diff < tol and n + 1 >= n_min:
            converged = True
            break
    return L_prev, history, converged, n_done


def _insertion_horizon(field, sys, start, n_max, backward):
    """Last orbit index whose lap meets a perturbation box, plus slack.

    Returns 1 for plain fields: the successive-difference criterion may
    then fire as soon as the first factor is in.
    """
    from .fields import PerturbedField

    if not isinstance(field, PerturbedField):
        return 1
    horizon = 1
    pt = sys.apply(start, -1) if backward else start
    for j in range(n_max):
        u, v = sys.coords(pt)
        if field.alpha(u, v) > 0.0:
            horizon = j + 3
        pt = sys.apply(pt, -1 if backward else 1)
    return horizon


@dataclass(eq=False)
class AxiomReport:
    """Residuals of the holonomy axioms on a leaf triple."""

    composition: float
    intertwining: float
    dist_ratio: float
    conjugation: float
    converged: bool


def holonomy_axiom_check(field, sys, roof, p, y, z, h=DEFAULT_STEP, tol=1e-9,
                         n_max=60, side="stable", j_range=(-3, 10)) -> AxiomReport:
    """Check the holonomy identities on three points of one local leaf.

    Residuals: (1) composition along x -> y -> z, (2) one-step
    intertwining by the cocycle, (3) ||L - id|| / d(x, y), and (4) the
    conjugation identity transported j steps along the orbit for j in
    the sampled range.
    """
    x_pt = p.point if isinstance(p, PeriodicOrbit) else p
    holo = stable_holonomy if side == "stable" else unstable_holonomy
    L_xy = holo(field, sys, roof, x_pt, y, n_max, tol, h)
    L_yz = holo(field, sys, roof, y, z, n_max, tol, h)
    L_xz = holo(field, sys, roof, x_pt, z, n_max, tol, h)
    ok = L_xy.converged and L_yz.converged and L_xz.converged
    r_comp = float(np.linalg.norm(L_xz.map.mat - L_yz.map.mat @ L_xy.map.mat))

    form = field.form
    sgn = 1 if side == "stable" else -1
    fx, fy = sys.apply(x_pt, sgn), sys.apply(y, sgn)
    L_f = holo(field, sys, roof, fx, fy, n_max, tol, h)
    psi_x = induced_factor_at(field, sys, roof, x_pt if sgn == 1 else fx, h)
    psi_y = induced_factor_at(field, sys, roof, y if sgn == 1 else fy, h)
    if side == "stable":
        # L_{x,y} = Psi(y)^{-1} L_{f x, f y} Psi(x)
        recon = symplectic_inverse(psi_y, form) @ L_f.map.mat @ psi_x
    else:
        # L_{x,y} = Psi(f^{-1} y) L_{f^{-1} x, f^{-1} y} Psi(f^{-1} x)^{-1}
        recon = psi_y @ L_f.map.mat @ symplectic_inverse(psi_x, form)
    r_int = float(np.linalg.norm(recon - L_xy.map.mat))

    d_xy = sys.distance(x_pt, y)
    r_ratio = float(np.linalg.norm(L_xy.map.mat - np.eye(field.dim))) / max(d_xy, 1e-300)

    r_conj = 0.0
    for j in range(j_range[0], j_range[1] + 1):
        if j == 0:
            continue
        yy, zz = sys.apply(y, j), sys.apply(z, j)
        L_j = holo(field, sys, roof, yy, zz, n_max, tol, h)
        psi_y_j = _psi_power(field, sys, roof, y, j, h)
        psi_z_j = _psi_power(field, sys, roof, z, j, h)
        pred = psi_z_j @ L_yz.map.mat @ symplectic_inverse(psi_y_j, form)
        r_conj = max(r_conj, float(np.linalg.norm(L_j.map.mat - pred)))
        ok = ok and L_j.converged
    return AxiomReport(composition=r_comp, intertwining=r_int, dist_ratio=r_ratio,
                       conjugation=r_conj, converged=ok)


def induced_factor_at(field, sys, roof, x, h=DEFAULT_STEP):
    orbit = orbit_data(sys, roof, x, 1, keep_points=False)
    return induced_factors(field, sys, roof, orbit, h)[0]


def _psi_power(field, sys, roof, x, j, h):
    """Psi^j(x) for either sign of j."""
    form = field.form
    if j == 0:
        return np.eye(field.dim)
    if j > 0:
        orbit = orbit_data(sys, roof, x, j)
        factors = induced_factors(field, sys, roof, orbit, h)
        out = np.eye(field.dim)
        for k in range(j):
            out = factors[k] @ out
        return out
    back = _psi_power(field, sys, roof, sys.apply(x, j), -j, h)
    return symplectic_inverse(back, form)


# ---------------------------------------------------------------------------
# atomic projective measures
# ---------------------------------------------------------------------------


def _canonical_direction(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    idx = np.argmax(np.abs(v) > 1e-12)
    if v[idx] < 0:
        v = -v
    return v


def projective_distance(u, v):
    """Sine of the principal angle between two directions."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.sqrt(max(0.0, 1.0 - min(1.0, c) ** 2))


@dataclass(eq=False)
class ProjectiveAtomMeasure:
    """Finitely many weighted directions (up to sign)."""

    atoms: list  # of (unit direction ndarray, weight)

    def __post_init__(self):
        total = sum(w for _, w in self.atoms)
        if abs(total - 1.0) > 1e-12:
            raise PreconditionError(f"atom weights sum to {total!r}, expected 1")
        dirs = [d for d, _ in self.atoms]
        for i in range(len(dirs)):
            for j in range(i + 1, len(dirs)):
                if projective_distance(dirs[i], dirs[j]) < 1e-10:
                    raise PreconditionError("atom directions must be pairwise distinct")

    @property
    def directions(self):
        return np.array([d for d, _ in self.atoms])

    @property
    def weights(self):
        return np.array([w for _, w in self.atoms])


def atomic_measure_at_periodic(field, sys, roof, p: PeriodicOrbit, h=DEFAULT_STEP,
                               imag_tol=1e-9, sep_tol=1e-8) -> ProjectiveAtomMeasure:
    """Invariant atomic measure at a periodic point.

    Exists when the return matrix over one period has real simple
    spectrum; the atoms sit at the eigendirections with uniform weights
    (only the support enters the rigidity comparisons).
    """
    R = _psi_power(field, sys, roof, p.point, p.period, h)
    vals, vecs = np.linalg.eig(R)
    scale = float(np.max(np.abs(vals)))
    if np.any(np.abs(vals.imag) > imag_tol * scale):
        raise SpectrumDegeneracyError(
            f"return spectrum is not real (max |Im| = {np.max(np.abs(vals.imag)):.3e})"
        )
    rv = np.sort(vals.real)
    if np.min(np.diff(rv)) <= sep_tol * scale:
        raise SpectrumDegeneracyError("return spectrum has (nearly) repeated eigenvalues")
    d = R.shape[0]
    atoms = [(_canonical_direction(vecs[:, i].real), 1.0 / d) for i in range(d)]
    return ProjectiveAtomMeasure(atoms=atoms)


def pushforward_compare(m: ProjectiveAtomMeasure, via, target: ProjectiveAtomMeasure):
    """Minimal-cost matching distance between the pushforward of ``m``
    and ``target`` in the projective sine metric.

    ``via`` may be a Holonomy, SympMatrix, or raw matrix.  Zero means
    the pushforward maps the support onto the target support exactly.
    """
    if isinstance(via, Holonomy):
        mat = via.map.mat
    elif isinstance(via, SympMatrix):
        mat = via.mat
    else:
        mat = np.asarray(via, dtype=float)
    src = m.directions
    dst = target.directions
    if len(src) != len(dst):
        raise PreconditionError("atom counts differ; pushforward comparison undefined")
    imgs = (mat @ src.T).T
    n = len(src)
    cost = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            cost[i, j] = projective_distance(imgs[i], dst[j])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())
