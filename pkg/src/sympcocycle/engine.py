"""Integration of the linear variational equation along the suspension flow.

The scheme is the implicit midpoint rule realized as a Cayley transform:
each step multiplies by (I - (h/2) Hm)^{-1} (I + (h/2) Hm) with Hm the
generator evaluated at the flowed midpoint.  The Cayley transform of a
Hamiltonian matrix is exactly symplectic, so the group constraint is
enforced structurally; the global accuracy is second order in the step.

All heavy paths are batched over many independent integrations (laps of
an orbit, flow segments, sampled points) so the per-step work is a
handful of vectorized array operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import SuspensionPoint, TorusPoint, suspend_flow
from .errors import PreconditionError, StepTooLargeError
from .fields import PerturbedField
from .symplectic import HamGenerator, SympMatrix, make_standard_form, opnorm, symplectic_defect, symplectic_inverse

__all__ = [
    "OrbitData",
    "orbit_data",
    "FundamentalSolution",
    "InducedCocycleValue",
    "fundamental_solution",
    "induced_cocycle",
    "induced_factors",
    "field_eval",
    "verify_cocycle_identity",
    "gronwall_check",
    "lipschitz_probe",
]

DEFAULT_STEP = 1e-3


# ---------------------------------------------------------------------------
# orbit precomputation
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class OrbitData:
    """Float data of a base orbit: coordinates and roof values per lap."""

    points: list
    u: np.ndarray
    v: np.ndarray
    rho: np.ndarray

    @property
    def n(self):
        return len(self.rho)

    def cumulative(self):
        c = np.zeros(self.n + 1)
        np.cumsum(self.rho, out=c[1:])
        return c


def orbit_data(sys, roof, x0, n_laps, keep_points=True, backward=False) -> OrbitData:
    """Precompute (u, v, roof) along the forward (or backward) orbit."""
    pts = []
    u = np.empty(n_laps)
    v = np.empty(n_laps)
    rho = np.empty(n_laps)
    x = x0
    for k in range(n_laps):
        if keep_points:
            pts.append(x)
        u[k], v[k] = sys.coords(x)
        rho[k] = roof.value(sys, x)
        x = sys.apply(x, -1 if backward else 1)
    return OrbitData(points=pts, u=u, v=v, rho=rho)


# ---------------------------------------------------------------------------
# batched Cayley stepping
# ---------------------------------------------------------------------------


def _cayley_apply(M, H, hstep):
    """M <- (I - X)^{-1} (I + X) M with X = (hstep/2) H, batched."""
    d = M.shape[-1]
    X = 0.5 * hstep[:, None, None] * H
    eye = np.eye(d)
    if d == 2:
        # closed-form 2x2 inverse of (I - X)
        a = 1.0 - X[:, 0, 0]
        b = -X[:, 0, 1]
        c = -X[:, 1, 0]
        dd = 1.0 - X[:, 1, 1]
        det = a * dd - b * c
        if np.any(np.abs(det) < 1e-12):
            raise StepTooLargeError("Cayley denominator is singular; reduce the step")
        inv = np.empty_like(X)
        inv[:, 0, 0] = dd / det
        inv[:, 0, 1] = -b / det
        inv[:, 1, 0] = -c / det
        inv[:, 1, 1] = a / det
        return inv @ ((eye + X) @ M)
    A = eye - X
    B = (eye + X) @ M
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise StepTooLargeError("Cayley denominator is singular; reduce the step") from exc


def _check_step(field, h):
    if h <= 0:
        raise PreconditionError(f"step must be positive, got {h}")
    if h * field.sup_bound >= 1.0:
        raise StepTooLargeError(
            f"h * sup||H|| = {h * field.sup_bound:.3g} >= 1; the Cayley "
            "denominator would be ill-conditioned"
        )


def _propagate(field, orbit: OrbitData, row, lap0, s0, T, h, M=None):
    """Batched midpoint/Cayley integration along precomputed orbit data.

    Each batch item starts at height ``s0[i]`` of lap ``lap0[i]`` (in
    orbit row ``row[i]`` when the orbit arrays are 2-d) and advances for
    total time ``T[i]`` on its own step grid: full steps of ``h`` plus a
    trailing partial step.
    """
    u2, v2, r2 = orbit.u, orbit.v, orbit.rho
    if u2.ndim == 1:
        u2, v2, r2 = u2[None, :], v2[None, :], r2[None, :]
    n = len(lap0)
    lap = np.array(lap0, dtype=np.intp)
    row = np.array(row, dtype=np.intp)
    s = np.array(s0, dtype=float)
    remaining = np.broadcast_to(np.asarray(T, dtype=float), (n,)).copy()
    d = field.dim
    if M is None:
        M = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    tiny = 1e-12 * h
    max_iter = int(math.ceil(float(np.max(remaining)) / h)) + 2
    n_laps = r2.shape[1]
    steps = 0
    for _ in range(max_iter):
        if not np.any(remaining > tiny):
            break
        hstep = np.minimum(h, np.maximum(remaining, 0.0))
        hstep[remaining <= tiny] = 0.0
        # midpoint, with at most one roof crossing (h <= 1 <= roof);
        # finished lanes multiply by the identity, so their (clamped)
        # lap index is irrelevant
        sm = s + 0.5 * hstep
        lapm = lap.copy()
        rho_here = r2[row, lapm]
        crossed = sm >= rho_here
        sm = np.where(crossed, sm - rho_here, sm)
        lapm = np.minimum(lapm + crossed, n_laps - 1)
        theta = sm / r2[row, lapm]
        H = field.h_batch(u2[row, lapm], v2[row, lapm], theta)
        M = _cayley_apply(M, H, hstep)
        s = s + hstep
        rho_here = r2[row, lap]
        crossed = s >= rho_here
        s = np.where(crossed, s - rho_here, s)
        lap = np.minimum(lap + crossed, n_laps - 1)
        remaining = remaining - hstep
        steps += 1
    return M, steps


# ---------------------------------------------------------------------------
# fundamental solutions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FundamentalSolution:
    """The integrated solution matrix with its provenance."""

    value: SympMatrix
    at: SuspensionPoint
    t: float
    step_count: int
    defect: float


@dataclass(eq=False)
class InducedCocycleValue:
    """Return-map cocycle value at a base point."""

    value: SympMatrix
    at: object


def _laps_needed(roof, height, t):
    return int(math.ceil((height + abs(t)) / roof.minimum)) + 2


def fundamental_solution(field, sys, roof, x: SuspensionPoint, t, h=DEFAULT_STEP,
                         perturbation_mode="insertion") -> FundamentalSolution:
    """Solution of u' = H(X^t x) u over time ``t`` (either sign).

    Negative times use the inverse relation: the solution backward from
    x equals the inverse of the forward solution from the backward
    endpoint.  For perturbed fields, ``perturbation_mode`` selects the
    exact insertion formula ("insertion") or an honest pointwise
    re-integration of the modified generator ("direct").
    """
    _check_step(field, h)
    t = float(t)
    if abs(t) / h > 1e8:
        raise PreconditionError("requested more than 1e8 steps; coarsen h or shorten t")
    if t < 0:
        y = suspend_flow(sys, roof, x, t)
        fwd = fundamental_solution(field, sys, roof, y, -t, h, perturbation_mode)
        mat = symplectic_inverse(fwd.value.mat, field.form)
        return FundamentalSolution(
            value=SympMatrix(ell=field.ell, mat=mat,
                             defect=symplectic_defect(mat, field.form)),
            at=x, t=t, step_count=fwd.step_count,
            defect=symplectic_defect(mat, field.form),
        )
    if isinstance(field, PerturbedField):
        if perturbation_mode == "direct":
            mat, steps = _propagate_perturbed_direct(field, sys, roof, x, t, h)
        else:
            mat, steps = _propagate_perturbed_insertion(field, sys, roof, x, t, h)
    else:
        orbit = orbit_data(sys, roof, x.base, _laps_needed(roof, x.height, t),
                           keep_points=False)
        M, steps = _propagate(field, orbit, [0], [0], [x.height], t, h)
        mat = M[0]
    dft = symplectic_defect(mat, field.form)
    return FundamentalSolution(
        value=SympMatrix(ell=field.ell, mat=mat, defect=dft),
        at=x, t=t, step_count=steps, defect=dft,
    )


def field_eval(field, pt: SuspensionPoint, sys=None, roof=None, h=DEFAULT_STEP) -> HamGenerator:
    """Pointwise field value at a suspension point.

    For perturbed fields the insertion term needs the unperturbed
    solution from the box floor, which is integrated on demand.
    """
    sys = sys or field.sys
    roof = roof or field.roof
    if sys is None or roof is None:
        raise PreconditionError("field has no attached base system/roof; pass sys and roof")
    u, v = sys.coords(pt.base)
    r = roof.value(sys, pt.base)
    theta = pt.height / r
    if not isinstance(field, PerturbedField):
        return field.value(u, v, theta)
    base_val = field.base.value(u, v, theta).mat
    if not bool(field.in_box(u, v, pt.height)):
        return HamGenerator(ell=field.ell, mat=base_val)
    a = field.alpha(u, v)
    tau = pt.height - field.s0
    if tau <= 0:
        phi = np.eye(field.dim)
    else:
        sol = fundamental_solution(field.base, sys, roof,
                                   SuspensionPoint(pt.base, field.s0), tau, h)
        phi = sol.value.mat
    P = phi @ (a * field.E) @ symplectic_inverse(phi, field.form)
    return HamGenerator(ell=field.ell, mat=base_val + P)


# -- perturbed-field propagation ----------------------------------------------


def _box_events(field: PerturbedField, sys, roof, x: SuspensionPoint, t):
    """Transit intervals (absolute time, alpha, entry offset) of the box
    along the orbit of x over [0, t]."""
    n_laps = _laps_needed(roof, x.height, t)
    orbit = orbit_data(sys, roof, x.base, n_laps, keep_points=False)
    cum = orbit.cumulative() - x.height  # lap k spans [cum[k], cum[k+1])
    events = []
    for k in range(n_laps):
        a = field.alpha(orbit.u[k], orbit.v[k])
        if a <= 0.0:
            continue
        t_in = cum[k] + field.s0
        t_out = t_in + 1.0
        lo, hi = max(t_in, 0.0), min(t_out, t)
        if hi <= lo:
            continue
        events.append((lo, hi, float(a), lo - t_in))
    return events, orbit


def _expm_small(E):
    from scipy.linalg import expm

    return expm(E)


def _propagate_perturbed_insertion(field, sys, roof, x, t, h):
    """Piecewise integration with closed-form insertion factors.

    Over a transit the perturbed solution is Phi_t exp(tau alpha E), so
    only unperturbed pieces are integrated; insertions are exact.
    """
    events, _ = _box_events(field, sys, roof, x, t)
    M = np.eye(field.dim)
    steps = 0
    pos = 0.0
    for lo, hi, a, entry_off in events:
        if lo > pos:
            seg, st = _segment(field.base, sys, roof, x, pos, lo - pos, h)
            M = seg @ M
            steps += st
            pos = lo
        ins = _expm_small((hi - lo) * a * field.E)
        if entry_off > 0.0:
            # started mid-box: conjugate the insertion by the solution
            # from the box floor to the entry height
            floor_pt = suspend_flow(sys, roof, x, pos - entry_off)
            phi, st = _segment(field.base, sys, roof, floor_pt, 0.0, entry_off, h)
            ins = phi @ ins @ symplectic_inverse(phi, field.form)
            steps += st
        seg, st = _segment(field.base, sys, roof, x, pos, hi - pos, h)
        M = seg @ (ins @ M)
        steps += st
        pos = hi
    if pos < t:
        seg, st = _segment(field.base, sys, roof, x, pos, t - pos, h)
        M = seg @ M
        steps += st
    return M, steps


def _segment(field, sys, roof, x, offset, duration, h):
    """Unperturbed solution over [offset, offset + duration] along x's orbit."""
    if duration <= 0:
        return np.eye(field.dim), 0
    start = suspend_flow(sys, roof, x, offset)
    orbit = orbit_data(sys, roof, start.base, _laps_needed(roof, start.height, duration),
                       keep_points=False)
    M, steps = _propagate(field, orbit, [0], [0], [start.height], duration, h)
    return M[0], steps


def _propagate_perturbed_direct(field, sys, roof, x, t, h):
    """Pointwise re-integration of the perturbed generator.

    The insertion term needs the unperturbed solution from the box
    floor; it is co-integrated on the same grid (a half-step advances it
    to each midpoint), so the composite stays second order.
    """
    d = field.dim
    M = np.eye(d)
    base = field.base
    pt = x
    phi_hat = None  # unperturbed solution from box entry, while inside
    remaining = float(t)
    steps = 0
    form = field.form
    while remaining > 1e-12 * h:
        hstep = min(h, remaining)
        mid = suspend_flow(sys, roof, pt, 0.5 * hstep)
        u, v = sys.coords(mid.base)
        r = roof.value(sys, mid.base)
        Hm = base.h_batch(np.array([u]), np.array([v]), np.array([mid.height / r]))[0]
        inside = bool(field.in_box(u, v, mid.height))
        if inside:
            if phi_hat is None:
                phi_hat = np.eye(d)
            # advance a copy of phi_hat to the midpoint
            phim = _cayley_apply(phi_hat[None], Hm[None], np.array([0.5 * hstep]))[0]
            a = field.alpha(u, v)
            Hm = Hm + phim @ (a * field.E) @ symplectic_inverse(phim, form)
            phi_hat = _cayley_apply(phi_hat[None], base.h_batch(
                np.array([u]), np.array([v]), np.array([mid.height / r]))[0][None],
                np.array([hstep]))[0]
        else:
            phi_hat = None
        M = _cayley_apply(M[None], Hm[None], np.array([hstep]))[0]
        pt = suspend_flow(sys, roof, pt, hstep)
        remaining -= hstep
        steps += 1
    return M, steps


# ---------------------------------------------------------------------------
# induced cocycle
# ---------------------------------------------------------------------------


def induced_factors(field, sys, roof, orbit: OrbitData, h=DEFAULT_STEP):
    """Return-map factors over every lap of the orbit, batched.

    For a perturbed field with a box anchored at the section (s0 = 0)
    the factor picks up a closed-form right insertion exp(alpha E); a
    raised box splits each lap at the box floor.
    """
    _check_step(field, h)
    n = orbit.n
    lap0 = np.arange(n)
    rows = np.zeros(n, dtype=np.intp)
    if not isinstance(field, PerturbedField):
        M, _ = _propagate(field, orbit, rows, lap0, np.zeros(n), orbit.rho, h)
        return M
    alphas = field.alpha(orbit.u, orbit.v)
    base = field.base
    if field.s0 == 0.0:
        M, _ = _propagate(base, orbit, rows, lap0, np.zeros(n), orbit.rho, h)
        out = M.copy()
        for k in np.nonzero(alphas > 0.0)[0]:
            out[k] = M[k] @ _expm_small(alphas[k] * field.E)
        return out
    # generic anchor: integrate [0, s0] and [s0, rho] separately
    B, _ = _propagate(base, orbit, rows, lap0, np.zeros(n), np.full(n, field.s0), h)
    A, _ = _propagate(base, orbit, rows, lap0, np.full(n, field.s0),
                      orbit.rho - field.s0, h)
    out = np.empty_like(A)
    for k in range(n):
        if alphas[k] > 0.0:
            out[k] = A[k] @ _expm_small(alphas[k] * field.E) @ B[k]
        else:
            out[k] = A[k] @ B[k]
    return out


def induced_cocycle(field, sys, roof, x, h=DEFAULT_STEP) -> InducedCocycleValue:
    """One return-map value: the solution over a single lap from (x, 0)."""
    orbit = orbit_data(sys, roof, x, 1, keep_points=False)
    mat = induced_factors(field, sys, roof, orbit, h)[0]
    dft = symplectic_defect(mat, field.form)
    return InducedCocycleValue(
        value=SympMatrix(ell=field.ell, mat=mat, defect=dft), at=x
    )


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def verify_cocycle_identity(field, sys, roof, x: SuspensionPoint, t, s, h=DEFAULT_STEP):
    """Frobenius residual of the composition law at finite step size.

    The exact flow satisfies it identically; the discrete residual
    measures the integrator and vanishes at second order.
    """
    whole = fundamental_solution(field, sys, roof, x, t + s, h).value.mat
    first = fundamental_solution(field, sys, roof, x, t, h).value.mat
    mid = suspend_flow(sys, roof, x, t)
    second = fundamental_solution(field, sys, roof, mid, s, h).value.mat
    return float(np.linalg.norm(whole - second @ first))


def gronwall_check(field, sys, roof, x: SuspensionPoint, t, h=DEFAULT_STEP):
    """Growth bound pair: (measured ||Phi||_2, exp(sup||H|| |t|))."""
    sol = fundamental_solution(field, sys, roof, x, t, h)
    lhs = opnorm(sol.value.mat)
    rhs = math.exp(field.sup_bound * abs(t))
    return lhs, rhs


def lipschitz_probe(field, sys, roof, t, n_pairs=100, seed=0, h=DEFAULT_STEP,
                    displacement=1e-4):
    """Empirical Lipschitz constant of x -> Phi^t(x) over sampled pairs.

    Pairs are a random suspension point and a small base displacement of
    it; the reported value is the max difference quotient in the
    suspension metric.
    """
    if n_pairs < 1:
        raise PreconditionError("need n_pairs >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        xb = sys.random_point(rng)
        height = rng.uniform(0.0, roof.value(sys, xb) * 0.999)
        du, dv = rng.normal(0.0, displacement, size=2)
        if isinstance(xb, TorusPoint):
            yb = TorusPoint((float(xb.u) + du) % 1.0, (float(xb.v) + dv) % 1.0)
        else:
            yb = xb  # shift points: same point, probe height only
        hy = min(height, roof.value(sys, yb) * 0.999)
        px = SuspensionPoint(xb, height)
        py = SuspensionPoint(yb, hy)
        dist = sys.distance(xb, yb) + abs(height - hy)
        if dist <= 0:
            continue
        mx = fundamental_solution(field, sys, roof, px, t, h).value.mat
        my = fundamental_solution(field, sys, roof, py, t, h).value.mat
        worst = max(worst, float(np.linalg.norm(mx - my)) / dist)
    return worst
