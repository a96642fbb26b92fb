"""Generator fields over the suspension space.

A field assigns to every suspension point a Hamiltonian matrix.  Values
are linear combinations of a fixed Frobenius-orthonormal Hamiltonian
basis, with coefficient functions of the form

    c(x, s) = a0 + sum_j amp_j * cos(2 pi (ku_j u + kv_j v) + phase_j)
                         * sin(pi m_j s / roof(x)),    m_j >= 1,

in the base coordinates (u, v) and the normalized height.  Terms with
m = 0 must be spatially constant.  Both families are well defined on
the quotient space: the vertical sine factor vanishes at both ends of
every fiber, so the value at (x, roof(x)) equals the value at (f(x), 0)
exactly.  The sine profile is deliberately not smooth across the gluing
(its height derivative jumps), matching the Lipschitz regularity class
the integrator is designed for.

Closed-form sup and Lipschitz bounds are available from the term data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, PreconditionError
from .symplectic import HamGenerator, hamiltonian_basis, make_standard_form

__all__ = ["GeneratorField", "PerturbedField", "bump_profile", "diag_hyperbolic_matrix"]


def diag_hyperbolic_matrix(ell: int, a: float):
    """The Hamiltonian matrix diag(a, ..., a, -a, ..., -a)."""
    d = np.zeros((2 * ell, 2 * ell))
    d[:ell, :ell] = a * np.eye(ell)
    d[ell:, ell:] = -a * np.eye(ell)
    return d


class GeneratorField:
    """A Hamiltonian-valued field on the suspension space.

    Parameters
    ----------
    ell : int
        Half-dimension of the fibers.
    terms : sequence of (k, amp, ku, kv, phase, m)
        Coefficient terms; ``k`` indexes the Hamiltonian basis element,
        ``m`` the vertical sine mode (0 means constant, which forces
        ku = kv = 0).
    """

    def __init__(self, ell, terms, sys=None, roof=None):
        self.ell = int(ell)
        self.dim = 2 * self.ell
        self.form = make_standard_form(self.ell)
        self.basis = hamiltonian_basis(self.ell)
        self.n_coeffs = len(self.basis)
        terms = [tuple(t) for t in terms]
        for k, amp, ku, kv, phase, m in terms:
            if not 0 <= k < self.n_coeffs:
                raise InvalidDimensionError(f"basis index {k} out of range")
            if m == 0 and (ku != 0 or kv != 0):
                raise PreconditionError(
                    "constant-height terms (m=0) must be spatially constant to "
                    "respect the roof identification"
                )
            if m < 0:
                raise PreconditionError("vertical mode must be >= 0")
        self.terms = terms
        self._t_k = np.array([t[0] for t in terms], dtype=np.intp)
        self._t_amp = np.array([t[1] for t in terms], dtype=float)
        self._t_ku = np.array([t[2] for t in terms], dtype=float)
        self._t_kv = np.array([t[3] for t in terms], dtype=float)
        self._t_phase = np.array([t[4] for t in terms], dtype=float)
        self._t_m = np.array([t[5] for t in terms], dtype=float)
        self.sys = sys
        self.roof = roof
        # matrix of a purely constant field, if there is one
        self.is_constant = all(t[5] == 0 for t in terms)

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, ell, sys=None, roof=None):
        return cls(ell, [], sys=sys, roof=roof)

    @classmethod
    def constant(cls, mat, sys=None, roof=None):
        """Spatially constant field with the given Hamiltonian value."""
        mat = np.asarray(mat, dtype=float)
        if mat.shape[0] % 2:
            raise InvalidDimensionError("even dimension required")
        ell = mat.shape[0] // 2
        HamGenerator(ell=ell, mat=mat)  # validates membership
        basis = hamiltonian_basis(ell)
        coeffs = np.tensordot(basis, mat, axes=([1, 2], [0, 1]))
        terms = [(k, float(c), 0, 0, 0.0, 0) for k, c in enumerate(coeffs) if c != 0.0]
        return cls(ell, terms, sys=sys, roof=roof)

    @classmethod
    def rotation(cls, ell, a, sys=None, roof=None):
        """Constant field a*J, an isometry generator (zero exponents)."""
        form = make_standard_form(ell)
        return cls.constant(a * form.J, sys=sys, roof=roof)

    @classmethod
    def diag_hyperbolic(cls, ell, a, sys=None, roof=None):
        return cls.constant(diag_hyperbolic_matrix(ell, a), sys=sys, roof=roof)

    @classmethod
    def random(cls, ell, seed, scale, n_dirs=3, n_terms=2, max_freq=2,
               constant_share=0.3, sys=None, roof=None):
        """Seeded random field with sup bound equal to ``scale``.

        Picks ``n_dirs`` basis directions; each gets a constant part and
        ``n_terms`` oscillatory terms with random small frequencies,
        phases, and vertical modes in {1, 2}.
        """
        if scale <= 0:
            raise PreconditionError("scale must be positive")
        rng = np.random.default_rng(seed)
        n_coeffs = ell * (2 * ell + 1)
        dirs = rng.choice(n_coeffs, size=min(n_dirs, n_coeffs), replace=False)
        terms = []
        for k in dirs:
            terms.append((int(k), constant_share * rng.standard_normal(), 0, 0, 0.0, 0))
            for _ in range(n_terms):
                while True:
                    ku, kv = rng.integers(-max_freq, max_freq + 1, size=2)
                    if ku or kv:
                        break
                amp = rng.standard_normal()
                phase = rng.uniform(0.0, 2.0 * math.pi)
                m = int(rng.integers(1, 3))
                terms.append((int(k), float(amp), int(ku), int(kv), float(phase), m))
        f = cls(ell, terms, sys=sys, roof=roof)
        factor = scale / max(f.sup_bound, 1e-300)
        terms = [(k, a * factor, ku, kv, ph, m) for k, a, ku, kv, ph, m in f.terms]
        return cls(ell, terms, sys=sys, roof=roof)

    def add(self, other: "GeneratorField") -> "GeneratorField":
        """Pointwise sum of two fields over the same fiber dimension."""
        if other.ell != self.ell:
            raise InvalidDimensionError("cannot add fields of different fiber dimension")
        return GeneratorField(self.ell, list(self.terms) + list(other.terms),
                              sys=self.sys or other.sys, roof=self.roof or other.roof)

    # -- evaluation ----------------------------------------------------------
    def coeffs_at(self, u, v, theta):
        """Coefficient vector(s) at base coordinates and normalized height."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        v = np.atleast_1d(np.asarray(v, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        C = np.zeros((self.n_coeffs, u.shape[0]))
        for i in range(len(self.terms)):
            k = self._t_k[i]
            val = self._t_amp[i] * np.cos(
                2.0 * math.pi * (self._t_ku[i] * u + self._t_kv[i] * v) + self._t_phase[i]
            )
            m = self._t_m[i]
            if m > 0:
                val = val * np.sin(math.pi * m * theta)
            C[k] += val
        return C[:, 0] if scalar else C

    def h_batch(self, u, v, theta):
        """Stacked Hamiltonian values, shape (n, 2*ell, 2*ell)."""
        n = np.atleast_1d(np.asarray(u)).shape[0]
        if not self.terms:
            return np.broadcast_to(np.zeros((self.dim, self.dim)), (n, self.dim, self.dim)).copy()
        C = self.coeffs_at(u, v, theta)
        if C.ndim == 1:
            C = C[:, None]
        return np.einsum("kn,kij->nij", C, self.basis)

    def value(self, u, v, theta) -> HamGenerator:
        mat = self.h_batch(np.array([u]), np.array([v]), np.array([theta]))[0]
        return HamGenerator(ell=self.ell, mat=mat)

    def constant_matrix(self):
        """The single matrix of a constant field."""
        if not self.is_constant:
            raise PreconditionError("field is not spatially constant")
        return self.h_batch(np.array([0.0]), np.array([0.0]), np.array([0.0]))[0]

    # -- closed-form bounds ----------------------------------------------------
    @property
    def sup_bound(self):
        """Upper bound on sup ||H||_F from the term data.

        The basis is orthonormal, so ||H||_F is the Euclidean norm of
        the coefficient vector, bounded by per-coefficient amplitude
        sums.
        """
        per_coeff = np.zeros(self.n_coeffs)
        for i in range(len(self.terms)):
            per_coeff[self._t_k[i]] += abs(self._t_amp[i])
        return float(np.linalg.norm(per_coeff))

    def lipschitz_bound(self, roof):
        """Upper bound on the Lipschitz constant of the field w.r.t. the
        suspension metric d((x,s),(y,r)) = d_base(x,y) + |s - r|.

        Assembled termwise from exact derivative bounds of the trig
        factors; the height dependence enters through theta = s/roof(x),
        whose base sensitivity is controlled by the roof Lipschitz data.
        """
        rho_min = roof.minimum
        rho_max = roof.maximum
        theta_base = roof.lipschitz * rho_max / rho_min**2
        per_coeff = np.zeros(self.n_coeffs)
        for i in range(len(self.terms)):
            amp = abs(self._t_amp[i])
            base_rate = 2.0 * math.pi * (abs(self._t_ku[i]) + abs(self._t_kv[i]))
            m = self._t_m[i]
            vert_rate = math.pi * m * (1.0 / rho_min + theta_base) if m > 0 else 0.0
            per_coeff[self._t_k[i]] += amp * (base_rate + vert_rate)
        return float(np.linalg.norm(per_coeff, 1))


# ---------------------------------------------------------------------------
# flowbox-supported perturbations
# ---------------------------------------------------------------------------


def bump_profile(dist, radius):
    """Smooth plateau bump: 1 on [0, radius/2], 0 beyond radius.

    The transition is exp(1 - 1/(1 - r^2)) with r = (2 dist - radius)/radius,
    a standard C-infinity profile.
    """
    scalar = np.asarray(dist).ndim == 0
    d = np.atleast_1d(np.asarray(dist, dtype=float))
    out = np.zeros_like(d)
    out[d <= radius / 2.0] = 1.0
    mask = (d > radius / 2.0) & (d < radius)
    if np.any(mask):
        r = (2.0 * d[mask] - radius) / radius
        out[mask] = np.exp(1.0 - 1.0 / (1.0 - r * r))
    return float(out[0]) if scalar else out


def _bump_lipschitz(radius):
    # max |d bump / d dist|; the profile's slope scales like 1/radius
    xs = np.linspace(0.0, radius, 4001)
    ys = bump_profile(xs, radius)
    return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))


@dataclass(eq=False)
class PerturbedField:
    """A base field plus a Hamiltonian insertion supported in a flowbox.

    Inside the cylinder {d(y, center) < radius} x [s0, s0 + 1] the field
    gains the term  Phi_t  alpha(d) E  Phi_t^{-1}, where Phi_t is the
    unperturbed solution from the box floor.  The added term vanishes
    identically outside the cylinder, so the field equals the base field
    there exactly (same floating-point values).
    """

    base: GeneratorField
    center_uv: tuple
    s0: float
    radius: float
    E: np.ndarray
    p_sup_bound: float = 0.0
    p_lip_bound: float = 0.0
    center_base: object = None

    def __post_init__(self):
        self.ell = self.base.ell
        self.dim = self.base.dim
        self.form = self.base.form
        self.E = np.asarray(self.E, dtype=float)
        self.sys = self.base.sys
        self.roof = self.base.roof
        self.is_constant = False
        e_norm = float(np.linalg.norm(self.E))
        if self.p_sup_bound == 0.0:
            self.p_sup_bound = e_norm
        if self.p_lip_bound == 0.0:
            self.p_lip_bound = e_norm * _bump_lipschitz(self.radius)

    def transverse_dist(self, u, v):
        du = np.abs(np.asarray(u, dtype=float) - self.center_uv[0])
        dv = np.abs(np.asarray(v, dtype=float) - self.center_uv[1])
        du = np.minimum(du, 1.0 - du)
        dv = np.minimum(dv, 1.0 - dv)
        return np.hypot(du, dv)

    def alpha(self, u, v):
        """Bump amplitude of the insertion at transverse position (u, v)."""
        return bump_profile(self.transverse_dist(u, v), self.radius)

    def in_box(self, u, v, s):
        d = self.transverse_dist(u, v)
        return (d < self.radius) & (np.asarray(s) >= self.s0) & (np.asarray(s) <= self.s0 + 1.0)

    @property
    def sup_bound(self):
        return self.base.sup_bound + self.p_sup_bound

    def lipschitz_bound(self, roof):
        return self.base.lipschitz_bound(roof) + self.p_lip_bound
