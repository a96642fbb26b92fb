import math

import numpy as np
import pytest

from sympcocycle.base import (
    CatMap,
    ConstantRoof,
    CosineBumpRoof,
    SuspensionPoint,
    TorusPoint,
    suspend_flow,
)
from sympcocycle.engine import (
    fundamental_solution,
    gronwall_check,
    induced_cocycle,
    lipschitz_probe,
    verify_cocycle_identity,
)
from sympcocycle.errors import PreconditionError, StepTooLargeError
from sympcocycle.fields import GeneratorField
from sympcocycle.symplectic import make_standard_form, opnorm

X0 = SuspensionPoint(TorusPoint(0.31, 0.77), 0.4)


class TestFundamentalSolution:
    def test_zero_field_identity(self, cat, roof2):
        f = GeneratorField.zero(1)
        sol = fundamental_solution(f, cat, roof2, X0, 7.3, 1e-2)
        assert np.array_equal(sol.value.mat, np.eye(2))
        assert sol.defect == 0.0

    def test_zero_time_identity_exact(self, cat, roof2):
        f = GeneratorField.random(1, seed=1, scale=0.3)
        sol = fundamental_solution(f, cat, roof2, X0, 0.0, 1e-2)
        assert np.array_equal(sol.value.mat, np.eye(2))
        assert sol.step_count == 0

    def test_constant_diag_closed_form(self, cat, bump_roof):
        # u' = diag(a,-a) u  =>  diag(e^{at}, e^{-at}); second order in h
        a, t, h = 0.3, 3.0, 1e-3
        f = GeneratorField.diag_hyperbolic(1, a)
        sol = fundamental_solution(f, cat, bump_roof, X0, t, h)
        expected = np.diag([math.exp(a * t), math.exp(-a * t)])
        err = np.abs(sol.value.mat - expected).max()
        assert err <= 5.0 * h**2 * t
        assert err > 0.0

    def test_constant_rotation_closed_form(self, cat, bump_roof):
        a, t, h = 0.5, 2.0, 1e-3
        f = GeneratorField.rotation(1, a)
        sol = fundamental_solution(f, cat, bump_roof, X0, t, h)
        th = a * t
        expected = np.array([[math.cos(th), -math.sin(th)],
                             [math.sin(th), math.cos(th)]])
        assert np.abs(sol.value.mat - expected).max() <= 5.0 * h**2 * t

    def test_order_two_against_closed_form(self, cat, roof2):
        a, t = 0.4, 1.0
        f = GeneratorField.diag_hyperbolic(1, a)
        errs = []
        for h in (2e-3, 1e-3, 5e-4):
            sol = fundamental_solution(f, cat, roof2, X0, t, h)
            errs.append(abs(sol.value.mat[0, 0] - math.exp(a * t)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)

    def test_inverse_relation(self, cat, bump_roof):
        f = GeneratorField.random(1, seed=8, scale=0.3)
        for t in (0.7, 4.2, 10.0):
            fwd = fundamental_solution(f, cat, bump_roof, X0, t, 1e-3).value.mat
            y = suspend_flow(cat, bump_roof, X0, t)
            bwd = fundamental_solution(f, cat, bump_roof, y, -t, 1e-3).value.mat
            assert np.linalg.norm(fwd @ bwd - np.eye(2)) <= 1e-9

    def test_symplectic_defect_small(self, cat, bump_roof):
        f = GeneratorField.random(2, seed=3, scale=0.05)
        sol = fundamental_solution(f, cat, bump_roof, X0, 50.0, 1e-3)
        assert sol.defect <= 1e-10

    def test_accumulated_defect_isometry(self, cat, roof2):
        # 1e5 steps of an isometric cocycle: pure rounding accumulation
        f = GeneratorField.rotation(1, 0.3)
        sol = fundamental_solution(f, cat, roof2, X0, 100.0, 1e-3)
        assert sol.step_count == 100000
        assert sol.defect <= 1e-10

    def test_per_step_defect(self, cat, roof2):
        f = GeneratorField.random(1, seed=5, scale=0.3)
        sol = fundamental_solution(f, cat, roof2, X0, 1e-3, 1e-3)
        assert sol.step_count == 1
        assert sol.defect <= 1e-14

    def test_step_guard(self, cat, roof2):
        f = GeneratorField.diag_hyperbolic(1, 30.0)
        with pytest.raises(StepTooLargeError):
            fundamental_solution(f, cat, roof2, X0, 1.0, 0.1)

    def test_too_many_steps_guard(self, cat, roof2):
        f = GeneratorField.zero(1)
        with pytest.raises(PreconditionError):
            fundamental_solution(f, cat, roof2, X0, 1e6, 1e-3)


class TestCocycleIdentity:
    def test_trivial_zero_times(self, cat, bump_roof):
        f = GeneratorField.random(1, seed=2, scale=0.3)
        assert verify_cocycle_identity(f, cat, bump_roof, X0, 0.0, 1.3, 1e-3) <= 1e-12
        assert verify_cocycle_identity(f, cat, bump_roof, X0, 1.3, 0.0, 1e-3) <= 1e-12

    def test_zero_field_exact(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        assert verify_cocycle_identity(f, cat, bump_roof, X0, 1.1, 2.2, 1e-2) == 0.0

    def test_residual_second_order(self, cat, roof2):
        # junction pinned mid-step against roof-commensurate kinks: the
        # residual is then a deterministic second-order quantity
        f = GeneratorField.random(1, seed=0, scale=0.25)
        x = SuspensionPoint(TorusPoint(0.15, 0.7), 0.0)
        res = []
        for h in (1e-3, 5e-4):
            res.append(verify_cocycle_identity(f, cat, roof2, x, 1.0 + h / 2, 2.6, h))
        assert res[0] <= 1e-6
        assert res[0] / res[1] == pytest.approx(4.0, abs=0.3)


class TestGronwall:
    def test_zero_field(self, cat, roof2):
        f = GeneratorField.zero(1)
        lhs, rhs = gronwall_check(f, cat, roof2, X0, 3.0)
        assert lhs == 1.0 and rhs == 1.0

    def test_diag_field_bounds(self, cat, roof2):
        # measured growth e^{a t}; bound uses the Frobenius sup = sqrt2 a
        a, t = 0.4, 5.0
        f = GeneratorField.diag_hyperbolic(1, a)
        lhs, rhs = gronwall_check(f, cat, roof2, X0, t, 1e-3)
        assert lhs == pytest.approx(math.exp(a * t), rel=1e-5)
        assert rhs == pytest.approx(math.exp(math.sqrt(2) * a * t), rel=1e-12)
        assert lhs <= rhs * (1 + 1e-6)

    def test_random_fields_hold(self, cat, bump_roof):
        for seed in range(100):
            f = GeneratorField.random(1, seed=(7, seed), scale=0.2)
            lhs, rhs = gronwall_check(f, cat, bump_roof, X0, 5.0, 5e-3)
            assert lhs <= rhs * (1 + 1e-6)


class TestInducedCocycle:
    def test_zero_field(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        val = induced_cocycle(f, cat, bump_roof, TorusPoint(0.2, 0.5))
        assert np.array_equal(val.value.mat, np.eye(2))

    def test_constant_field_matrix_exponential(self, cat, roof2):
        a = 0.3
        f = GeneratorField.diag_hyperbolic(1, a)
        val = induced_cocycle(f, cat, roof2, TorusPoint(0.2, 0.5), h=1e-3)
        expected = np.diag([math.exp(a * roof2.c), math.exp(-a * roof2.c)])
        assert np.abs(val.value.mat - expected).max() <= 1e-6

    def test_composition_matches_full_integration(self, cat, bump_roof):
        # Psi^n(x) vs the single integration over the summed roof:
        # both are second-order approximations of the same matrix
        f = GeneratorField.random(1, seed=10, scale=0.2)
        x = TorusPoint(0.21, 0.62)
        h = 1e-3
        n = 4
        prod = np.eye(2)
        pt = x
        total = 0.0
        for _ in range(n):
            prod = induced_cocycle(f, cat, bump_roof, pt, h=h).value.mat @ prod
            total += bump_roof.value(cat, pt)
            pt = cat.apply(pt, 1)
        whole = fundamental_solution(f, cat, bump_roof, SuspensionPoint(x, 0.0),
                                     total, h).value.mat
        assert np.linalg.norm(prod - whole) <= 50.0 * h**2 * n

    def test_induced_matches_fundamental_at_roof_time(self, cat, bump_roof):
        f = GeneratorField.random(1, seed=11, scale=0.2)
        x = TorusPoint(0.4, 0.9)
        h = 1e-3
        val = induced_cocycle(f, cat, bump_roof, x, h=h).value.mat
        direct = fundamental_solution(f, cat, bump_roof, SuspensionPoint(x, 0.0),
                                      bump_roof.value(cat, x), h).value.mat
        assert np.linalg.norm(val - direct) <= 1e-12


class TestLipschitzProbe:
    def test_zero_field(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        assert lipschitz_probe(f, cat, bump_roof, 1.0, n_pairs=20, seed=0) == 0.0

    def test_space_constant_field_with_constant_roof(self, cat, roof2):
        # no spatial dependence anywhere: the solution cannot vary
        f = GeneratorField.diag_hyperbolic(1, 0.3)
        val = lipschitz_probe(f, cat, roof2, 1.0, n_pairs=20, seed=0, h=5e-3)
        assert val <= 1e-8

    def test_generic_field_below_analytic_envelope(self, cat, bump_roof):
        f = GeneratorField.random(1, seed=14, scale=0.2)
        t = 1.0
        val = lipschitz_probe(f, cat, bump_roof, t, n_pairs=60, seed=1, h=5e-3)
        bound = 10.0 * math.exp(2.0 * t * f.sup_bound) * max(
            f.lipschitz_bound(bump_roof), 1.0
        )
        assert 0.0 < val <= bound


class TestSpectrumSymmetryOfSolutions:
    def test_solutions_pass_symmetry_check(self, cat, bump_roof):
        from sympcocycle.symplectic import spectrum_symmetry_check

        for seed in (0, 1, 2):
            f = GeneratorField.random(2, seed=seed, scale=0.2)
            sol = fundamental_solution(f, cat, bump_roof, X0, 5.0, 2e-3)
            ok, _ = spectrum_symmetry_check(sol.value.mat, tol=1e-6)
            assert ok
