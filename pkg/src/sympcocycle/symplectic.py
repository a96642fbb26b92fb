"""Symplectic linear algebra substrate.

Everything here is exact or explicitly toleranced: the standard form J,
membership defects for the symplectic group and its Lie algebra,
eigenvalue-symmetry diagnostics, and seeded random sampling of
Hamiltonian generators.

Conventions: the half-dimension is ``ell`` and matrices are
``2*ell x 2*ell`` real; the Frobenius norm is used for every defect,
the operator 2-norm wherever a growth rate is meant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError

__all__ = [
    "SympForm",
    "HamGenerator",
    "SympMatrix",
    "make_standard_form",
    "symplectic_defect",
    "algebra_defect",
    "spectrum_symmetry_check",
    "random_generator",
    "symplectic_inverse",
    "hamiltonian_part",
    "hamiltonian_basis",
    "opnorm",
]


def opnorm(mat):
    """Operator 2-norm."""
    return float(np.linalg.norm(np.asarray(mat, dtype=float), 2))


def _check_square(mat, ell):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] != 2 * ell:
        raise InvalidDimensionError(
            f"matrix is {mat.shape[0]}x{mat.shape[1]} but half-dimension ell={ell} "
            f"requires {2 * ell}x{2 * ell}"
        )
    return mat


@dataclass(frozen=True, eq=False)
class SympForm:
    """The standard symplectic form on R^(2*ell).

    ``J`` is the block matrix [[0, -I], [I, 0]] with integer entries, so
    the identities J^2 = -I, J^T = -J, J^{-1} = J^T hold exactly in
    floating point.
    """

    ell: int
    J: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return 2 * self.ell


def make_standard_form(ell: int) -> SympForm:
    """Build the standard form for half-dimension ``ell`` (>= 1)."""
    if not isinstance(ell, (int, np.integer)) or ell < 1:
        raise InvalidDimensionError(f"half-dimension must be a positive integer, got {ell!r}")
    ell = int(ell)
    J = np.zeros((2 * ell, 2 * ell))
    J[:ell, ell:] = -np.eye(ell)
    J[ell:, :ell] = np.eye(ell)
    return SympForm(ell=ell, J=J)


def symplectic_defect(A, form: SympForm) -> float:
    """Frobenius norm of A^T J A - J; zero iff A preserves the form."""
    A = _check_square(A, form.ell)
    return float(np.linalg.norm(A.T @ form.J @ A - form.J))


def algebra_defect(H, form: SympForm) -> float:
    """Frobenius norm of J H + H^T J; zero iff H is an infinitesimally
    symplectic (Hamiltonian) matrix."""
    H = _check_square(H, form.ell)
    return float(np.linalg.norm(form.J @ H + H.T @ form.J))


@dataclass(frozen=True, eq=False)
class HamGenerator:
    """A pointwise value of a Hamiltonian generator: H with J H + H^T J = 0.

    Units of ``mat`` are 1/time.  Construction validates the algebra
    relation (tolerance 1e-12 absolute) and the implied zero trace.
    """

    ell: int
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        form = make_standard_form(self.ell)
        mat = _check_square(self.mat, self.ell)
        object.__setattr__(self, "mat", mat)
        d = algebra_defect(mat, form)
        if d > 1e-12 * max(1.0, float(np.linalg.norm(mat))):
            raise InvalidDimensionError(f"matrix is not Hamiltonian: algebra defect {d:.3e}")
        tr = abs(float(np.trace(mat)))
        if tr > 1e-12 * max(1.0, float(np.linalg.norm(mat))):
            raise InvalidDimensionError(f"Hamiltonian matrix must be traceless, |tr| = {tr:.3e}")

    @property
    def norm(self):
        return float(np.linalg.norm(self.mat))


@dataclass(frozen=True, eq=False)
class SympMatrix:
    """A matrix in the symplectic group, with its measured defect.

    ``tol`` bounds the admissible defect ||A^T J A - J||_F at
    construction; long products pass an explicitly widened tolerance.
    """

    ell: int
    mat: np.ndarray = field(repr=False)
    defect: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mat", _check_square(self.mat, self.ell))

    @classmethod
    def checked(cls, mat, ell, tol=1e-10, det_tol=1e-8):
        form = make_standard_form(ell)
        d = symplectic_defect(mat, form)
        if d > tol:
            raise InvalidDimensionError(f"symplectic defect {d:.3e} exceeds tolerance {tol:.1e}")
        det = float(np.linalg.det(np.asarray(mat, dtype=float)))
        if abs(det - 1.0) > det_tol * max(1.0, abs(det)):
            raise InvalidDimensionError(f"determinant {det!r} is not 1 within {det_tol:.1e}")
        return cls(ell=int(ell), mat=np.asarray(mat, dtype=float), defect=d)


def symplectic_inverse(A, form: SympForm):
    """Inverse of a symplectic matrix via A^{-1} = J^T A^T J.

    Cheap and structure-preserving; accurate to the symplectic defect
    of ``A``.
    """
    A = _check_square(A, form.ell)
    return form.J.T @ A.T @ form.J


def hamiltonian_part(M, form: SympForm):
    """Project onto the Hamiltonian (infinitesimally symplectic) matrices.

    Uses the linear involution X -> J X^T J whose fixed space is the
    algebra; the projection (X + J X^T J)/2 is exact in floating point
    because J acts by signed permutation.
    """
    M = _check_square(M, form.ell)
    return 0.5 * (M + form.J @ M.T @ form.J)


def hamiltonian_basis(ell: int):
    """Frobenius-orthonormal basis of the Hamiltonian matrices.

    Every element is J*S with S in the orthonormal symmetric basis, so
    membership is exact in floating point and the dimension is
    ell*(2*ell + 1).
    """
    form = make_standard_form(ell)
    d = 2 * ell
    basis = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(d):
        S = np.zeros((d, d))
        S[i, i] = 1.0
        basis.append(form.J @ S)
    for i in range(d):
        for j in range(i + 1, d):
            S = np.zeros((d, d))
            S[i, j] = inv_sqrt2
            S[j, i] = inv_sqrt2
            basis.append(form.J @ S)
    return np.array(basis)


def random_generator(ell: int, seed, scale: float = 1.0) -> HamGenerator:
    """Seeded random Hamiltonian generator with ||H||_F = scale.

    Samples G with iid standard normal entries and returns
    J * (G + G^T)/2 rescaled; the construction is exactly Hamiltonian
    in floating point and deterministic per seed.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    form = make_standard_form(ell)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((2 * ell, 2 * ell))
    S = 0.5 * (G + G.T)
    H = form.J @ S
    nrm = float(np.linalg.norm(H))
    if nrm == 0.0:  # essentially impossible; resample deterministically
        return random_generator(ell, (seed, 1), scale)
    H = H * (scale / nrm)
    return HamGenerator(ell=ell, mat=H)


def _closed_under(vals, mapped, tol):
    """Greedy nearest matching of ``mapped`` values back into ``vals``.

    Returns True when every mapped eigenvalue finds a distinct partner
    within relative tolerance ``tol``.
    """
    vals = list(vals)
    used = [False] * len(vals)
    for w in mapped:
        best, best_err = -1, np.inf
        for i, v in enumerate(vals):
            if used[i]:
                continue
            err = abs(v - w) / max(abs(w), 1e-30)
            if err < best_err:
                best, best_err = i, err
        if best < 0 or best_err > tol:
            return False
        used[best] = True
    return True


def spectrum_symmetry_check(A, tol: float = 1e-8):
    """Check eigenvalue symmetry of a symplectic matrix.

    The eigenvalue multiset of a symplectic matrix is closed under
    s -> 1/s and s -> conj(s).  Returns ``(ok, eigenvalues)``; a
    violation reports False rather than raising.
    """
    if isinstance(A, SympMatrix):
        mat, ell = A.mat, A.ell
    else:
        mat = np.asarray(A, dtype=float)
        if mat.shape[0] % 2:
            raise InvalidDimensionError("symplectic matrices have even dimension")
        ell = mat.shape[0] // 2
    _check_square(mat, ell)
    vals = np.linalg.eigvals(mat)
    ok = _closed_under(vals, 1.0 / vals, tol) and _closed_under(vals, np.conj(vals), tol)
    return bool(ok), vals
