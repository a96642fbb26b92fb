"""Flowbox perturbations of generator fields and the holonomy-breaking
experiment.

A perturbation realizes a prescribed symplectic map S as the extra
time-one transition of the solution through a thin cylinder
ball x [s0, s0+1]: writing S = exp(E) with a Hamiltonian generator E,
the modified field gains Phi_t (alpha E) Phi_t^{-1} inside the box and
is untouched outside.  The perturbed solution through a full transit is
exactly the unperturbed one followed by exp(alpha E), which both speeds
up long experiments and makes the realization identity testable against
an independent re-integration.

The budget bookkeeping: K bounds the solution norms and the generator
norm over unit time; admissible generators have norm below
delta = epsilon / (6 K^3), and the measured size of the added term must
stay below 3 K^3 delta < epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, logm

from .base import CatMap, PeriodicOrbit, SuspensionPoint, TorusPoint
from .engine import (
    DEFAULT_STEP,
    OrbitData,
    _propagate,
    field_eval,
    fundamental_solution,
    induced_factors,
    orbit_data,
)
from .errors import BudgetError, GeometryError, IsotopyError, PreconditionError
from .fields import GeneratorField, PerturbedField, diag_hyperbolic_matrix
from .holonomy import (
    atomic_measure_at_periodic,
    projective_distance,
    pushforward_compare,
    stable_holonomy,
    unstable_holonomy,
)
from .spectrum import spectrum_induced
from .symplectic import (
    SympMatrix,
    hamiltonian_part,
    make_standard_form,
    symplectic_defect,
    symplectic_inverse,
)

__all__ = [
    "PerturbationBudget",
    "FlowboxPerturbation",
    "compute_K",
    "isotopy_generator",
    "isotopy_path_defect",
    "log_generator",
    "build_perturbation",
    "verify_realization",
    "simplify_return_spectrum",
    "plane_rotation_generator",
    "BreakResult",
    "break_holonomy",
    "genericity_probe",
]


@dataclass(frozen=True)
class PerturbationBudget:
    """epsilon: field-norm budget; K: solution/generator bound; the
    admissible generator size is delta = epsilon / (6 K^3)."""

    epsilon: float
    K: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise PreconditionError("epsilon must be positive")
        if self.K < 1.0:
            raise PreconditionError("K must dominate 1 (it bounds the identity solution)")

    @property
    def delta(self):
        return self.epsilon / (6.0 * self.K**3)


def compute_K(field, sys, roof, n_samples=1000, h=5e-3, seed=0, safety=1.5):
    """Sampled bound on solution norms over unit time and the field norm.

    Maximizes ||Phi^t(z)|| and ||Phi^t(z)^{-1}|| over sampled points and
    quarter-unit checkpoints, adds the field's sup and Lipschitz data,
    and inflates by ``safety``.
    """
    if n_samples < 1000:
        raise PreconditionError("need at least 1e3 samples")
    rng = np.random.default_rng(seed)
    pts = [sys.random_point(rng) for _ in range(n_samples)]
    n = len(pts)
    max_laps = int(math.ceil(1.0 / roof.minimum)) + 3
    u = np.empty((n, max_laps))
    v = np.empty((n, max_laps))
    rho = np.empty((n, max_laps))
    heights = np.empty(n)
    for i, p in enumerate(pts):
        q = p
        for k in range(max_laps):
            u[i, k], v[i, k] = sys.coords(q)
            rho[i, k] = roof.value(sys, q)
            q = sys.apply(q, 1)
        heights[i] = rng.uniform(0.0, rho[i, 0])
    orbit = OrbitData(points=[], u=u, v=v, rho=rho)
    form = field.form
    best = 1.0
    lap = np.zeros(n, dtype=np.intp)
    s = heights.copy()
    M = np.broadcast_to(np.eye(field.dim), (n, field.dim, field.dim)).copy()
    rows = np.arange(n)
    for _ in range(4):
        M, _ = _propagate(field, orbit, rows, lap, s, 0.25, h, M=M)
        # advance the state bookkeeping by the same quarter unit
        s = s + 0.25
        crossed = s >= rho[rows, lap]
        s = np.where(crossed, s - rho[rows, lap], s)
        lap = lap + crossed
        norms = np.linalg.norm(M, ord=2, axis=(1, 2))
        best = max(best, float(norms.max()))
        inv_norms = np.linalg.norm(
            form.J.T @ M.transpose(0, 2, 1) @ form.J, ord=2, axis=(1, 2)
        )
        best = max(best, float(inv_norms.max()))
    h_norm = field.sup_bound + field.lipschitz_bound(roof)
    return safety * max(1.0, best, h_norm)


def isotopy_generator(S, t):
    """Generator (S - I) S_t^{-1} of the affine path S_t = (1-t) I + t S.

    The affine path is not a group path, so this generator is
    Hamiltonian only up to O(||S - I||^2); the builder uses the
    one-parameter-subgroup generator instead (see ``log_generator``).
    """
    S = S.mat if isinstance(S, SympMatrix) else np.asarray(S, dtype=float)
    d = S.shape[0]
    St = (1.0 - t) * np.eye(d) + t * S
    try:
        inv = np.linalg.inv(St)
    except np.linalg.LinAlgError as exc:
        raise IsotopyError(f"affine interpolant singular at t={t}") from exc
    if abs(np.linalg.det(St)) < 1e-12:
        raise IsotopyError(f"affine interpolant nearly singular at t={t}")
    return (S - np.eye(d)) @ inv


def isotopy_path_defect(S, n_grid=1000):
    """Max algebra defect of the affine-path generator over a t-grid."""
    S = S.mat if isinstance(S, SympMatrix) else np.asarray(S, dtype=float)
    form = make_standard_form(S.shape[0] // 2)
    worst = 0.0
    for t in np.linspace(0.0, 1.0, n_grid):
        G = isotopy_generator(S, t)
        worst = max(worst, float(np.linalg.norm(form.J @ G + G.T @ form.J)))
    return worst


def log_generator(S, form):
    """Hamiltonian generator E with exp(E) = S, for S near the identity.

    The matrix logarithm of a symplectic matrix near I lies in the
    algebra; the numerical log is projected exactly onto it and checked
    to reproduce S.
    """
    S = S.mat if isinstance(S, SympMatrix) else np.asarray(S, dtype=float)
    d = S.shape[0]
    if np.array_equal(S, np.eye(d)):
        return np.zeros((d, d))
    E = logm(S)
    if np.max(np.abs(E.imag)) > 1e-10:
        raise IsotopyError("matrix logarithm is not real; S is too far from the identity")
    E = hamiltonian_part(E.real, form)
    err = float(np.linalg.norm(expm(E) - S))
    if err > 1e-8 * max(1.0, float(np.linalg.norm(S))):
        raise IsotopyError(f"generator does not reproduce the target map (residual {err:.2e})")
    return E


@dataclass(eq=False)
class FlowboxPerturbation:
    """A built perturbation: geometry, budget, and measured certificates."""

    center: SuspensionPoint
    radius: float
    target: SympMatrix
    generator: np.ndarray
    budget: PerturbationBudget
    resulting_field: object
    base_field: GeneratorField
    measured_sup: float
    measured_algebra_defect: float
    support_violations: int


def _min_roof_on_ball(sys, roof, center_uv, radius, n_grid=64):
    if roof.is_constant:
        return roof.minimum
    # the cosine roof only depends on u; scan the u-interval of the ball
    us = (center_uv[0] + np.linspace(-radius, radius, n_grid)) % 1.0
    return float(np.min(roof.c0 + roof.a * np.cos(2.0 * math.pi * us)))


def build_perturbation(field, sys, roof, x: SuspensionPoint, S, rho_box, epsilon,
                       h=DEFAULT_STEP, n_support_samples=1000, seed=0,
                       budget=None) -> FlowboxPerturbation:
    """Attach a flowbox insertion realizing the symplectic map S at x.

    Preconditions: the unit-time orbit segment from x must stay inside
    one lap of the suspension (box floor at x's height), and the
    generator of S must fit the budget delta = epsilon/(6 K^3).
    """
    if isinstance(field, PerturbedField):
        raise PreconditionError("stacking flowbox perturbations is not supported")
    if not isinstance(sys, CatMap):
        raise PreconditionError(
            "flowbox perturbations need the transverse disc structure of the "
            "torus base"
        )
    form = field.form
    S_mat = S.mat if isinstance(S, SympMatrix) else np.asarray(S, dtype=float)
    sd = symplectic_defect(S_mat, form)
    if sd > 1e-8:
        raise PreconditionError(f"target map is not symplectic (defect {sd:.2e})")
    if rho_box <= 0 or rho_box > 0.25:
        raise GeometryError("transverse radius must lie in (0, 0.25] on the torus")
    cu, cv = sys.coords(x.base)
    s0 = float(x.height)
    min_roof = _min_roof_on_ball(sys, roof, (cu, cv), rho_box)
    if s0 + 1.0 > min_roof + 1e-12:
        raise GeometryError(
            f"the unit-time box [s0, s0+1] = [{s0}, {s0 + 1}] pokes above the "
            f"roof (min over the ball {min_roof}); the orbit would re-enter"
        )
    if budget is None:
        budget = PerturbationBudget(epsilon=epsilon, K=compute_K(field, sys, roof, h=max(h, 2e-3)))
    E = log_generator(S_mat, form)
    e_norm = float(np.linalg.norm(E))
    if e_norm >= budget.delta:
        raise BudgetError(
            f"generator norm {e_norm:.3e} exceeds the admissible "
            f"delta = epsilon/(6 K^3) = {budget.delta:.3e}"
        )
    if e_norm == 0.0:
        # S = I realizes the trivial perturbation; the field is unchanged
        return FlowboxPerturbation(
            center=x, radius=rho_box, target=SympMatrix(ell=field.ell, mat=S_mat),
            generator=E, budget=budget, resulting_field=field, base_field=field,
            measured_sup=0.0, measured_algebra_defect=0.0, support_violations=0,
        )
    pert = PerturbedField(base=field, center_uv=(cu, cv), s0=s0, radius=rho_box,
                          E=E, center_base=x.base)
    sup_p, alg_defect, violations = _measure_insertion(pert, sys, roof,
                                                       n_support_samples, seed, h)
    limit = 3.0 * budget.K**3 * budget.delta
    if sup_p > limit:
        raise BudgetError(
            f"measured sup ||P|| = {sup_p:.3e} exceeds 3 K^3 delta = {limit:.3e}"
        )
    return FlowboxPerturbation(
        center=x, radius=rho_box, target=SympMatrix(ell=field.ell, mat=S_mat),
        generator=E, budget=budget, resulting_field=pert, base_field=field,
        measured_sup=sup_p, measured_algebra_defect=alg_defect,
        support_violations=violations,
    )


def _measure_insertion(pert: PerturbedField, sys, roof, n_samples, seed, h):
    """Sample the added term inside the box: sup norm and algebra defect.

    Also confirms the field is bitwise unchanged outside the cylinder.
    """
    rng = np.random.default_rng(seed)
    form = pert.form
    cu, cv = pert.center_uv
    sup_p = 0.0
    alg = 0.0
    n_inside = max(64, n_samples // 4)
    for _ in range(n_inside):
        r = pert.radius * math.sqrt(rng.uniform(0.0, 0.999))
        ang = rng.uniform(0.0, 2.0 * math.pi)
        zu = (cu + r * math.cos(ang)) % 1.0
        zv = (cv + r * math.sin(ang)) % 1.0
        tau = rng.uniform(0.0, 1.0)
        zb = TorusPoint(zu, zv)
        a = pert.alpha(zu, zv)
        if a <= 0.0:
            continue
        sol = fundamental_solution(pert.base, sys, roof,
                                   SuspensionPoint(zb, pert.s0), tau, max(h, 2e-3))
        phi = sol.value.mat
        P = phi @ (a * pert.E) @ symplectic_inverse(phi, form)
        sup_p = max(sup_p, float(np.linalg.norm(P)))
        alg = max(alg, float(np.linalg.norm(form.J @ P + P.T @ form.J)))
    violations = 0
    for _ in range(n_samples):
        pt = sys.random_point(rng)
        uu, vv = sys.coords(pt)
        s = rng.uniform(0.0, roof.value(sys, pt))
        if bool(pert.in_box(uu, vv, s)):
            continue
        th = s / roof.value(sys, pt)
        base_val = pert.base.h_batch(np.array([uu]), np.array([vv]), np.array([th]))[0]
        val = field_eval(pert, SuspensionPoint(pt, s), sys, roof, h=max(h, 2e-3)).mat
        if not np.array_equal(val, base_val):
            violations += 1
    return sup_p, alg, violations


def verify_realization(pert: FlowboxPerturbation, sys, roof, h=DEFAULT_STEP):
    """Residual of the realization identity at the box center.

    The perturbed solution is re-integrated pointwise (no insertion
    shortcut), so the residual is a genuine second-order measurement of
    Phi_perturbed^1(x) - Phi^1(x) S.
    """
    x = pert.center
    base = pert.base_field
    lhs = fundamental_solution(pert.resulting_field, sys, roof, x, 1.0, h,
                               perturbation_mode="direct").value.mat
    rhs = fundamental_solution(base, sys, roof, x, 1.0, h).value.mat @ pert.target.mat
    return float(np.linalg.norm(lhs - rhs))


# ---------------------------------------------------------------------------
# spectrum simplification and holonomy breaking
# ---------------------------------------------------------------------------


def simplify_return_spectrum(field, sys, roof, orbits, epsilon, h=DEFAULT_STEP,
                             n_grid=8):
    """Add a small hyperbolic term so the return maps at the given
    periodic orbits have real simple spectrum.

    Scans multiples of the normalized diagonal generator up to Frobenius
    size epsilon and returns (new field, measured change); raises when
    no multiple in the budget works.
    """
    from .holonomy import _psi_power

    D = diag_hyperbolic_matrix(field.ell, 1.0)
    d_norm = float(np.linalg.norm(D))
    for frac in np.linspace(1.0, 1.0 / n_grid, n_grid):
        c = epsilon * frac / d_norm
        cand = field.add(GeneratorField.constant(c * D))
        ok = True
        for orb in orbits:
            R = _psi_power(cand, sys, roof, orb.point, orb.period, h)
            vals = np.linalg.eig(R)[0]
            scale = float(np.max(np.abs(vals)))
            if np.any(np.abs(vals.imag) > 1e-9 * scale):
                ok = False
                break
            rv = np.sort(vals.real)
            if np.min(np.diff(rv)) <= 1e-8 * scale:
                ok = False
                break
        if ok:
            return cand, c * d_norm
    raise BudgetError(
        f"no hyperbolic term of size <= {epsilon} makes the return spectra real simple"
    )


def plane_rotation_generator(w1, w2, form):
    """Hamiltonian generator of the rotation in the symplectic plane
    spanned by w1, w2 (identity on the symplectic complement).

    Requires the plane to be symplectic: omega(w1, w2) != 0.
    """
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    om = float(w1 @ form.J @ w2)
    if abs(om) < 1e-12:
        raise PreconditionError("the two directions span a degenerate (isotropic) plane")
    e = w1 / np.linalg.norm(w1)
    ep = w2 / om * np.linalg.norm(w1)  # omega(e, ep) = 1
    # coefficients of x in the (e, ep) frame: a = omega(x, ep), b = omega(e, x)
    a_form = form.J @ ep
    b_form = -form.J.T @ e
    E = np.outer(ep, a_form) - np.outer(e, b_form)
    E = hamiltonian_part(E, form)
    return E / max(float(np.linalg.norm(E)), 1e-300)


@dataclass(eq=False)
class BreakResult:
    """Outcome of the holonomy-breaking experiment."""

    success: bool
    field: object
    mismatch: float
    baseline_mismatch: float
    generator_norm: float
    unstable_drift: float
    radius: float
    message: str = ""


def _orbit_clearance(sys, center, samples):
    return min(sys.distance(center, q) for q in samples)


def break_holonomy(field, sys, roof, p: PeriodicOrbit, q: PeriodicOrbit, z,
                   epsilon, h=DEFAULT_STEP, tol=1e-9, n_max=60,
                   budget=None) -> BreakResult:
    """Rotate the stable holonomy at a heteroclinic point without
    touching the unstable one.

    ``z`` must converge forward to the orbit of p and backward to the
    orbit of q; the return spectra at p and q must be real simple (run
    ``simplify_return_spectrum`` first).  A flowbox insertion at f(z)'s
    lap start applies a small symplectic-plane rotation; the angle is
    halved down a grid and the smallest one keeping the pushforward
    mismatch above 10x the holonomy tolerance is kept.  Failure to find
    one is reported, not raised.
    """
    form = field.form
    m_p = atomic_measure_at_periodic(field, sys, roof, p, h)
    m_q = atomic_measure_at_periodic(field, sys, roof, q, h)
    L_s = stable_holonomy(field, sys, roof, p, z, n_max=n_max, tol=tol, h=h)
    L_u = unstable_holonomy(field, sys, roof, q, z, n_max=n_max, tol=tol, h=h)
    if not (L_s.converged and L_u.converged):
        return BreakResult(False, field, 0.0, 0.0, 0.0, 0.0, 0.0,
                           "holonomies did not converge; no admissible experiment")
    atoms_s = (L_s.map.mat @ m_p.directions.T).T
    atoms_u = (L_u.map.mat @ m_q.directions.T).T
    baseline = pushforward_compare(m_q, L_u, _as_measure(atoms_s))

    # box center: the lap start of f^{period(p)}(z)
    k_box = p.period
    center = sys.apply(z, k_box)
    # clearance against every orbit point entering the holonomy limits
    samples = []
    pt = z
    horizon = n_max + 2 * max(p.period, q.period) + 2
    for j in range(1, horizon):
        pt = sys.apply(pt, 1)
        if j != k_box:
            samples.append(pt)
    pt = z
    samples.append(z)
    for j in range(1, horizon):
        pt = sys.apply(pt, -1)
        samples.append(pt)
    for orb in (p, q):
        op = orb.point
        for _ in range(orb.period):
            samples.append(op)
            op = sys.apply(op, 1)
    clearance = _orbit_clearance(sys, center, samples)
    radius = min(0.4 * clearance, 0.1)
    if radius < 1e-3:
        raise GeometryError(
            f"no admissible flowbox at f^{k_box}(z): clearance {clearance:.2e}"
        )
    if budget is None:
        budget = PerturbationBudget(epsilon=epsilon,
                                    K=compute_K(field, sys, roof, h=max(h, 2e-3)))

    # rotation plane: the two stable-image atoms closest in angle
    n_at = len(atoms_s)
    best_pair, best_d = (0, 1), np.inf
    for i in range(n_at):
        for j in range(i + 1, n_at):
            dij = projective_distance(atoms_s[i], atoms_s[j])
            if dij < best_d:
                best_pair, best_d = (i, j), dij
    G = plane_rotation_generator(atoms_s[best_pair[0]], atoms_s[best_pair[1]], form)

    # cache the unperturbed factors along the three orbits once
    z_fwd = orbit_data(sys, roof, z, n_max + 1)
    z_fwd_factors = induced_factors(field, sys, roof, z_fwd, h)
    p_factor = induced_factors(field, sys, roof, orbit_data(sys, roof, p.point, p.period), h)
    threshold = 10.0 * tol
    floor_mismatch = None
    chosen = None
    size = budget.delta / 2.0
    while size > np.finfo(float).tiny * 1e6:
        E = size * G
        Lp = _stable_limit_with_insertion(z_fwd_factors, p_factor, k_box,
                                          expm(E), form, n_max, tol)
        if Lp is None:
            break
        mism = pushforward_compare(m_q, L_u, _as_measure((Lp @ m_p.directions.T).T))
        if mism >= threshold:
            chosen = (size, E, mism)
            size /= 2.0
        else:
            break
    if chosen is None:
        return BreakResult(False, field, 0.0, baseline, 0.0, 0.0, radius,
                           "no angle in the budget grid moved the pushforward "
                           "above the mismatch floor")
    size, E, mism = chosen
    box_center = SuspensionPoint(center, 0.0)
    pert = build_perturbation(field, sys, roof, box_center,
                              SympMatrix(ell=field.ell, mat=expm(E)),
                              rho_box=radius, epsilon=epsilon, h=h, budget=budget)
    new_field = pert.resulting_field
    # recompute both holonomies honestly under the built field: the
    # backward orbits never meet the box, so the unstable drift is a
    # support-disjointness certificate
    L_s_after = stable_holonomy(new_field, sys, roof, p, z, n_max=n_max, tol=tol, h=h)
    mism_final = pushforward_compare(
        m_q, L_u, _as_measure((L_s_after.map.mat @ m_p.directions.T).T)
    )
    L_u_after = unstable_holonomy(new_field, sys, roof, q, z, n_max=n_max, tol=tol, h=h)
    drift = float(np.linalg.norm(L_u_after.map.mat - L_u.map.mat))
    return BreakResult(True, new_field, mism_final, baseline, size, drift, radius)


def _as_measure(directions):
    from .holonomy import ProjectiveAtomMeasure, _canonical_direction

    n = len(directions)
    return ProjectiveAtomMeasure(
        atoms=[(_canonical_direction(d), 1.0 / n) for d in directions]
    )


def _stable_limit_with_insertion(z_factors, p_factors, k_box, ins, form, n_max, tol):
    """Stable holonomy limit with the factor at step k_box replaced by
    Psi exp(alpha E); alpha = 1 at the box center."""
    d = form.J.shape[0]
    A = np.eye(d)
    Binv = np.eye(d)
    L_prev = np.eye(d)
    period = len(p_factors)
    for n in range(min(n_max, len(z_factors))):
        A = p_factors[n % period] @ A
        fz = z_factors[n]
        if n == k_box:
            fz = fz @ ins
        Binv = Binv @ symplectic_inverse(fz, form)
        L = Binv @ A
        if float(np.linalg.norm(L - L_prev)) < tol:
            return L
        L_prev = L
    return None


# ---------------------------------------------------------------------------
# genericity probe
# ---------------------------------------------------------------------------


def genericity_probe(ell, sys, roof, n_trials=20, epsilon_grid=(0.0, 0.02, 0.05, 0.1),
                     seed=0, h=5e-3, n_iters=2000, base_field=None,
                     base_scale=0.3, dust=1e-9):
    """Fraction of random perturbations producing a positive top exponent.

    The reference family is the isometry generator base_scale * J
    (all exponents zero) unless ``base_field`` is given.  For each
    epsilon in the grid, ``n_trials`` random fields of that size are
    added and the top exponent compared against 3x its standard error
    (plus a dust allowance for exactly isometric products).
    """
    if n_trials < 1:
        raise PreconditionError("need n_trials >= 1")
    base = base_field or GeneratorField.rotation(ell, base_scale)
    rng = np.random.default_rng(seed)
    rows = []
    for eps in epsilon_grid:
        hits = 0
        tops = []
        for trial in range(n_trials):
            x0 = sys.random_point(rng)
            if eps == 0.0:
                f = base
            else:
                f = base.add(GeneratorField.random(ell, seed=(seed, int(eps * 1e6), trial),
                                                   scale=eps))
            res = spectrum_induced(f, sys, roof, x0, n_iters, h=h)
            tops.append(res.top)
            if res.top > 3.0 * res.stderr_scale + dust:
                hits += 1
        rows.append({
            "epsilon": float(eps),
            "fraction_positive": hits / n_trials,
            "mean_top": float(np.mean(tops)),
        })
    return rows
