import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from sympcocycle.errors import InvalidDimensionError
from sympcocycle.symplectic import (
    HamGenerator,
    SympMatrix,
    algebra_defect,
    hamiltonian_basis,
    hamiltonian_part,
    make_standard_form,
    random_generator,
    spectrum_symmetry_check,
    symplectic_defect,
    symplectic_inverse,
)


class TestStandardForm:
    def test_ell_one_matrix(self):
        J = make_standard_form(1).J
        assert np.array_equal(J, np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_ell_two_blocks(self):
        J = make_standard_form(2).J
        expected = np.zeros((4, 4))
        expected[:2, 2:] = -np.eye(2)
        expected[2:, :2] = np.eye(2)
        assert np.array_equal(J, expected)

    @pytest.mark.parametrize("ell", [1, 2, 3, 4])
    def test_j_identities_exact(self, ell):
        J = make_standard_form(ell).J
        eye = np.eye(2 * ell)
        assert np.array_equal(J @ J, -eye)
        assert np.array_equal(J.T, -J)
        assert np.array_equal(J.T @ J, eye)  # J^{-1} = J^T

    def test_zero_dimension_rejected(self):
        with pytest.raises(InvalidDimensionError):
            make_standard_form(0)

    def test_deterministic(self):
        assert np.array_equal(make_standard_form(3).J, make_standard_form(3).J)


class TestDefects:
    def test_identity_is_symplectic(self):
        form = make_standard_form(2)
        assert symplectic_defect(np.eye(4), form) == 0.0

    def test_unimodular_diagonal_is_symplectic(self):
        form = make_standard_form(1)
        assert symplectic_defect(np.diag([2.0, 0.5]), form) == 0.0

    def test_scaled_identity_defect(self):
        # A = diag(2, 2): A^T J A = 4 J, defect = ||3 J||_F = 3 sqrt(2)
        form = make_standard_form(1)
        d = symplectic_defect(np.diag([2.0, 2.0]), form)
        assert d == pytest.approx(3.0 * np.sqrt(2.0), abs=1e-14)

    def test_zero_matrix_in_algebra(self):
        form = make_standard_form(1)
        assert algebra_defect(np.zeros((2, 2)), form) == 0.0

    @pytest.mark.parametrize("a", [0.3, -1.7, 12.0])
    def test_diagonal_traceless_in_algebra(self, a):
        form = make_standard_form(1)
        assert algebra_defect(np.diag([a, -a]), form) == 0.0

    def test_identity_algebra_defect(self):
        # J I + I J = 2 J, so the defect is ||2 J||_F = 2 sqrt(2)
        form = make_standard_form(1)
        assert algebra_defect(np.eye(2), form) == pytest.approx(2.0 * np.sqrt(2.0), abs=1e-14)

    def test_dimension_mismatch(self):
        form = make_standard_form(2)
        with pytest.raises(InvalidDimensionError):
            symplectic_defect(np.eye(2), form)
        with pytest.raises(InvalidDimensionError):
            algebra_defect(np.eye(6), form)


class TestSpectrumSymmetry:
    def test_reciprocal_pair(self):
        ok, vals = spectrum_symmetry_check(np.diag([3.0, 1.0 / 3.0]), tol=1e-10)
        assert ok
        assert sorted(np.real(vals)) == pytest.approx([1.0 / 3.0, 3.0])

    def test_rotation_unit_circle_pair(self):
        th = 0.7
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        ok, vals = spectrum_symmetry_check(R, tol=1e-10)
        assert ok
        assert np.abs(np.abs(vals) - 1.0).max() < 1e-12

    def test_random_symplectic_product(self):
        # group closure: a product of ten exponentials of Hamiltonian
        # matrices is symplectic and must pass the symmetry check
        form = make_standard_form(2)
        A = np.eye(4)
        for k in range(10):
            H = random_generator(2, (99, k), 0.4)
            A = expm(H.mat) @ A
        assert symplectic_defect(A, form) < 1e-11
        ok, _ = spectrum_symmetry_check(A, tol=1e-6)
        assert ok

    def test_violation_reported_not_raised(self):
        ok, _ = spectrum_symmetry_check(np.diag([2.0, 2.0]), tol=1e-8)
        assert not ok


class TestHamGenerator:
    def test_validation_rejects_non_hamiltonian(self):
        with pytest.raises(InvalidDimensionError):
            HamGenerator(ell=1, mat=np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_accepts_diag(self):
        g = HamGenerator(ell=1, mat=np.diag([0.5, -0.5]))
        assert g.norm == pytest.approx(np.sqrt(0.5))


class TestRandomGenerator:
    def test_determinism(self):
        a = random_generator(2, 42, 1.3)
        b = random_generator(2, 42, 1.3)
        assert np.array_equal(a.mat, b.mat)

    def test_distinct_seeds_differ(self):
        a = random_generator(2, 1, 1.0)
        b = random_generator(2, 2, 1.0)
        assert np.linalg.norm(a.mat - b.mat) > 0.0

    def test_norm_equals_scale(self):
        g = random_generator(3, 7, 0.37)
        assert np.linalg.norm(g.mat) == pytest.approx(0.37, rel=1e-12)

    @pytest.mark.parametrize("ell", [1, 2, 3, 4])
    def test_bulk_membership(self, ell):
        # spot the advertised bulk bounds on a large seeded sample
        form = make_standard_form(ell)
        worst_alg, worst_tr = 0.0, 0.0
        for seed in range(1000):
            H = random_generator(ell, (ell, seed), 1.0).mat
            worst_alg = max(worst_alg, algebra_defect(H, form))
            worst_tr = max(worst_tr, abs(np.trace(H)))
        assert worst_alg <= 1e-13
        assert worst_tr <= 1e-12

    @given(st.integers(min_value=0, max_value=10**9),
           st.floats(min_value=1e-3, max_value=10.0))
    @settings(max_examples=50, deadline=None)
    def test_membership_property(self, seed, scale):
        form = make_standard_form(2)
        H = random_generator(2, seed, scale).mat
        assert algebra_defect(H, form) <= 1e-13 * max(1.0, scale)


class TestProductsAndInverse:
    def test_near_closure_under_products(self):
        # moderate-norm symplectic samples: defect(AB) stays within the
        # advertised envelope 10 (defect(A) + defect(B)) + 1e-12
        form = make_standard_form(2)
        rngs = [(3, k) for k in range(40)]
        mats = [expm(random_generator(2, s, 0.5).mat) for s in rngs]
        for i in range(0, 38, 2):
            A, B = mats[i], mats[i + 1]
            dA = symplectic_defect(A, form)
            dB = symplectic_defect(B, form)
            dAB = symplectic_defect(A @ B, form)
            assert dAB <= 10.0 * (dA + dB) + 1e-12

    def test_symplectic_inverse(self):
        form = make_standard_form(2)
        A = expm(random_generator(2, 5, 0.8).mat)
        inv = symplectic_inverse(A, form)
        assert np.linalg.norm(A @ inv - np.eye(4)) < 1e-12

    def test_hamiltonian_projection_idempotent_and_exact(self):
        form = make_standard_form(2)
        rng = np.random.default_rng(0)
        X = rng.standard_normal((4, 4))
        P = hamiltonian_part(X, form)
        assert algebra_defect(P, form) < 1e-14
        assert np.allclose(hamiltonian_part(P, form), P, atol=1e-15)


class TestBasis:
    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_dimension_and_orthonormality(self, ell):
        basis = hamiltonian_basis(ell)
        assert len(basis) == ell * (2 * ell + 1)
        G = np.einsum("aij,bij->ab", basis, basis)
        assert np.allclose(G, np.eye(len(basis)), atol=1e-14)

    def test_every_element_in_algebra(self):
        form = make_standard_form(2)
        for B in hamiltonian_basis(2):
            assert algebra_defect(B, form) == 0.0

    def test_checked_sympmatrix(self):
        with pytest.raises(InvalidDimensionError):
            SympMatrix.checked(np.diag([2.0, 2.0]), ell=1)
        m = SympMatrix.checked(np.diag([2.0, 0.5]), ell=1)
        assert m.defect == 0.0
