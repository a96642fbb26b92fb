"""Lyapunov spectra via QR-reorthogonalized products.

The standard treppen iteration: push an orthonormal frame through the
cocycle, re-QR-factorize with positive diagonal, and average the log
diagonal of R.  Exponents of the flow are reported per unit flow time,
of the return cocycle per iterate; the roof integral is the only bridge
between the two conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import CAT_MATRIX, CatMap, SuspensionPoint
from .engine import DEFAULT_STEP, induced_factors, orbit_data, _propagate, _check_step
from .errors import NumericalDegeneracyError, PreconditionError
from .fields import PerturbedField

__all__ = [
    "SpectrumResult",
    "qr_product_exponents",
    "spectrum_induced",
    "spectrum_flow",
    "scaling_law_check",
    "poincare_flow_exponents",
]


@dataclass(eq=False)
class SpectrumResult:
    """Sorted exponent estimates with convergence diagnostics.

    ``exponents`` are nonincreasing; ``stderr`` are per-exponent block
    standard errors; ``pairing_residual`` is max_i |l_i + l_{2l-i+1}|
    and ``sum_residual`` is |sum l_i| (both vanish for exact symplectic
    cocycles).
    """

    exponents: np.ndarray
    stderr: np.ndarray
    n_steps: int
    reorth_interval: int
    pairing_residual: float
    sum_residual: float
    unit: str = "per-iterate"
    elapsed: float = 0.0
    block_count: int = 0

    @property
    def top(self):
        return float(self.exponents[0])

    @property
    def stderr_scale(self):
        return float(np.max(self.stderr)) if len(self.stderr) else 0.0


def _positive_qr(B):
    Q, R = np.linalg.qr(B)
    diag = np.diag(R).copy()
    if np.any(diag == 0.0) or np.any(np.abs(diag) < 1e-300):
        raise NumericalDegeneracyError("rank collapse: QR diagonal underflow")
    signs = np.sign(diag)
    return Q * signs, np.abs(diag)


def qr_product_exponents(factors, time_per_factor, reorth=1, n_blocks=50):
    """Exponents of a sequence of cocycle factors.

    Parameters
    ----------
    factors : array (n, d, d)
        Cocycle values applied in order factors[0], factors[1], ...
    time_per_factor : float or array (n,)
        Normalization per factor (1 for per-iterate, the segment length
        for flow time).
    reorth : int
        Factors multiplied between re-orthogonalizations.
    """
    n, d, _ = factors.shape
    times = np.broadcast_to(np.asarray(time_per_factor, dtype=float), (n,))
    Q = np.eye(d)
    n_groups = n // reorth
    logs = np.empty((n_groups, d))
    group_time = np.empty(n_groups)
    for g in range(n_groups):
        B = Q
        t = 0.0
        for k in range(g * reorth, (g + 1) * reorth):
            B = factors[k] @ B
            t += times[k]
        Q, rdiag = _positive_qr(B)
        logs[g] = np.log(rdiag)
        group_time[g] = t
    total_time = float(group_time.sum())
    exps = logs.sum(axis=0) / total_time
    order = np.argsort(exps)[::-1]
    exps = exps[order]
    logs = logs[:, order]
    # block standard errors of the per-time exponent estimates
    B = min(n_blocks, n_groups)
    stderr = np.zeros(d)
    if B >= 2:
        bs = n_groups // B
        bl = np.empty((B, d))
        for b in range(B):
            sl = slice(b * bs, (b + 1) * bs)
            bl[b] = logs[sl].sum(axis=0) / group_time[sl].sum()
        stderr = bl.std(axis=0, ddof=1) / math.sqrt(B)
    pairing = float(np.max(np.abs(exps + exps[::-1])))
    return exps, stderr, pairing, float(abs(exps.sum())), total_time, B


def spectrum_induced(field, sys, roof, x0, n, reorth=1, h=DEFAULT_STEP) -> SpectrumResult:
    """Exponents (per iterate) of the return cocycle along an orbit."""
    if n < 100:
        raise PreconditionError("need at least 100 iterates")
    if reorth < 1:
        raise PreconditionError("reorthogonalization interval must be >= 1")
    orbit = orbit_data(sys, roof, x0, n, keep_points=False)
    factors = induced_factors(field, sys, roof, orbit, h)
    exps, stderr, pairing, sumres, total, nb = qr_product_exponents(
        factors, 1.0, reorth=reorth
    )
    return SpectrumResult(
        exponents=exps, stderr=stderr, n_steps=n, reorth_interval=reorth,
        pairing_residual=pairing, sum_residual=sumres, unit="per-iterate",
        elapsed=float(orbit.rho.sum()), block_count=nb,
    )


def spectrum_flow(field, sys, roof, x0: SuspensionPoint, T_total, reorth_time=1.0,
                  h=DEFAULT_STEP) -> SpectrumResult:
    """Exponents (per unit flow time) of the flow cocycle.

    The orbit is cut into segments of length ``reorth_time``; each
    segment's solution matrix is one QR factor.
    """
    if T_total < 100:
        raise PreconditionError("need T_total >= 100 for a meaningful estimate")
    if isinstance(field, PerturbedField):
        raise PreconditionError(
            "flow spectra are computed for plain fields; estimate perturbed "
            "spectra through the return cocycle and the roof integral"
        )
    _check_step(field, h)
    n_seg = int(T_total / reorth_time)
    n_laps = int(math.ceil((x0.height + T_total) / roof.minimum)) + 2
    orbit = orbit_data(sys, roof, x0.base, n_laps, keep_points=False)
    # segment start states along the single orbit
    cum = orbit.cumulative()
    starts = x0.height + reorth_time * np.arange(n_seg)
    lap0 = np.searchsorted(cum, starts, side="right") - 1
    s0 = starts - cum[lap0]
    M, _ = _propagate(field, orbit, np.zeros(n_seg, dtype=np.intp), lap0, s0,
                      reorth_time, h)
    exps, stderr, pairing, sumres, total, nb = qr_product_exponents(
        M, reorth_time, reorth=1
    )
    return SpectrumResult(
        exponents=exps, stderr=stderr, n_steps=n_seg, reorth_interval=1,
        pairing_residual=pairing, sum_residual=sumres, unit="per-time",
        elapsed=float(n_seg * reorth_time), block_count=nb,
    )


def scaling_law_check(field, sys, roof, x0, n, h=DEFAULT_STEP, reorth=1,
                      reorth_time=1.0):
    """Compare flow and return-cocycle top exponents over one orbit.

    Returns (lhs, rhs, relative error): lhs is the flow estimate, rhs
    the induced estimate divided by the Birkhoff average of the roof
    along the same orbit (the finite-orbit estimate of the roof
    integral).
    """
    ind = spectrum_induced(field, sys, roof, x0, n, reorth=reorth, h=h)
    roof_avg = ind.elapsed / n
    flow = spectrum_flow(field, sys, roof, SuspensionPoint(x0, 0.0),
                         T_total=ind.elapsed, reorth_time=reorth_time, h=h)
    lhs = flow.top
    rhs = ind.top / roof_avg
    scale = max(abs(rhs), flow.stderr_scale, 1e-300)
    return lhs, rhs, abs(lhs - rhs) / scale


def poincare_flow_exponents(sys, roof, x0: SuspensionPoint, T_total,
                            reorth_time=1.0) -> SpectrumResult:
    """Exponents of the tangent flow projected off the flow direction.

    Only implemented over the torus automorphism, where one lap acts on
    a tangent vector (du, dv, ds) by the block matrix
    [[A, 0], [-grad roof, 1]]: the derivative matrix is accumulated lap
    by lap, projected onto the base-tangent plane, and fed to the QR
    sweep.  The flow direction itself is fixed pointwise (zero
    exponent) and removed by the projection.
    """
    if not isinstance(sys, CatMap):
        raise PreconditionError("the projected tangent flow is implemented for the cat map")
    n_seg = int(T_total / reorth_time)
    n_laps = int(math.ceil((x0.height + T_total) / roof.minimum)) + 2
    orbit = orbit_data(sys, roof, x0.base, n_laps, keep_points=False)
    cum = orbit.cumulative()
    A = CAT_MATRIX.astype(float)
    # lap jump matrices of the 3x3 tangent cocycle
    laps3 = np.empty((n_laps, 3, 3))
    for k in range(n_laps):
        L = np.eye(3)
        L[:2, :2] = A
        if roof.is_constant:
            gu = 0.0
        else:
            gu = -2.0 * math.pi * roof.a * math.sin(2.0 * math.pi * orbit.u[k])
        L[2, 0] = -gu
        laps3[k] = L
    # segment factors: product of lap jumps crossed within each segment
    boundaries = x0.height + reorth_time * np.arange(n_seg + 1)
    first = np.searchsorted(cum[1:], boundaries[:-1], side="right")
    last = np.searchsorted(cum[1:], boundaries[1:], side="right")
    proj = np.zeros((3, 3))
    proj[0, 0] = proj[1, 1] = 1.0
    factors = np.empty((n_seg, 2, 2))
    for g in range(n_seg):
        M = np.eye(3)
        for k in range(first[g], last[g]):
            M = laps3[k] @ M
        factors[g] = (proj @ M)[:2, :2]
    exps, stderr, pairing, sumres, total, nb = qr_product_exponents(
        factors, reorth_time, reorth=1
    )
    return SpectrumResult(
        exponents=exps, stderr=stderr, n_steps=n_seg, reorth_interval=1,
        pairing_residual=pairing, sum_residual=sumres, unit="per-time",
        elapsed=float(n_seg * reorth_time), block_count=nb,
    )
