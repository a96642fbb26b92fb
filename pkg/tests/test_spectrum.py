import math

import numpy as np
import pytest

from sympcocycle.base import (
    CAT_EXPANSION,
    CatMap,
    ConstantRoof,
    CosineBumpRoof,
    SuspensionPoint,
    TorusPoint,
)
from sympcocycle.errors import PreconditionError
from sympcocycle.fields import GeneratorField
from sympcocycle.spectrum import (
    poincare_flow_exponents,
    qr_product_exponents,
    scaling_law_check,
    spectrum_flow,
    spectrum_induced,
)

X0 = TorusPoint(0.123, 0.567)


class TestInduced:
    def test_zero_field_all_zero(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        r = spectrum_induced(f, cat, bump_roof, X0, 200, h=1e-2)
        assert np.array_equal(r.exponents, np.zeros(2))

    def test_constant_diag_closed_form(self, cat, roof2):
        # identical factors diag(e^{ac}, e^{-ac}): exponents {ac, -ac}
        a, c = 0.3, roof2.c
        f = GeneratorField.diag_hyperbolic(1, a)
        r = spectrum_induced(f, cat, roof2, X0, 300, h=1e-3)
        assert abs(r.exponents[0] - a * c) <= 1e-6
        assert abs(r.exponents[1] + a * c) <= 1e-6
        assert r.pairing_residual <= 1e-6

    def test_rotation_isometry_zero(self, cat, roof2):
        # products are rotations, so every norm is one
        f = GeneratorField.rotation(1, 0.4)
        r = spectrum_induced(f, cat, roof2, X0, 500, h=5e-3)
        assert abs(r.exponents[0]) <= 3.0 * r.stderr_scale + 1e-12

    def test_exponents_sorted_and_paired(self, cat, bump_roof):
        f = GeneratorField.random(2, seed=17, scale=0.15)
        r = spectrum_induced(f, cat, bump_roof, X0, 3000, h=5e-3)
        assert np.all(np.diff(r.exponents) <= 0)
        assert r.pairing_residual <= 3.0 * r.stderr_scale + 1e-9
        assert r.sum_residual <= 4.0 * r.stderr_scale + 1e-9

    def test_min_iterates_guard(self, cat, roof2):
        with pytest.raises(PreconditionError):
            spectrum_induced(GeneratorField.zero(1), cat, roof2, X0, 50)

    def test_reorthogonalization_invariance(self, cat, roof2):
        f = GeneratorField.diag_hyperbolic(1, 0.3)
        r1 = spectrum_induced(f, cat, roof2, X0, 400, reorth=1, h=5e-3)
        r5 = spectrum_induced(f, cat, roof2, X0, 400, reorth=5, h=5e-3)
        assert np.abs(r1.exponents - r5.exponents).max() <= 1e-8

    def test_seed_orbit_invariance(self, cat, bump_roof):
        # ergodicity probe: top exponents from independent starting
        # points agree within five standard errors of their mean
        f = GeneratorField.diag_hyperbolic(1, 0.2).add(
            GeneratorField.random(1, seed=30, scale=0.1))
        rng = np.random.default_rng(0)
        tops, errs = [], []
        for _ in range(10):
            r = spectrum_induced(f, cat, bump_roof, cat.random_point(rng), 4000, h=1e-2)
            tops.append(r.top)
            errs.append(r.stderr_scale)
        spread = np.abs(np.array(tops) - np.mean(tops)).max()
        assert spread <= 5.0 * max(errs)

    def test_stderr_shrinks(self, cat, bump_roof):
        f = GeneratorField.random(1, seed=31, scale=0.2)
        r1 = spectrum_induced(f, cat, bump_roof, X0, 2000, h=1e-2)
        r2 = spectrum_induced(f, cat, bump_roof, X0, 32000, h=1e-2)
        # stderr ~ n^{-1/2}: a 16x longer run shrinks it by about 4
        assert r2.stderr_scale <= 0.6 * r1.stderr_scale


class TestFlow:
    def test_zero_field(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        r = spectrum_flow(f, cat, bump_roof, SuspensionPoint(X0, 0.0), 150.0, h=1e-2)
        assert np.array_equal(r.exponents, np.zeros(2))

    def test_constant_diag_per_time(self, cat, roof2):
        a = 0.3
        f = GeneratorField.diag_hyperbolic(1, a)
        r = spectrum_flow(f, cat, roof2, SuspensionPoint(X0, 0.0), 400.0, 1.0, h=1e-3)
        assert abs(r.exponents[0] - a) <= 1e-6
        assert abs(r.exponents[1] + a) <= 1e-6

    def test_pairing_over_random_fields(self, cat, bump_roof):
        for seed in range(5):
            f = GeneratorField.random(1, seed=(40, seed), scale=0.2)
            r = spectrum_flow(f, cat, bump_roof, SuspensionPoint(X0, 0.0), 500.0, h=1e-2)
            assert r.pairing_residual <= 3.0 * r.stderr_scale + 1e-9


class TestQRSweep:
    def test_known_product(self):
        # factor diag(2, 1/2) applied 100 times: exponents log 2, -log 2
        factors = np.broadcast_to(np.diag([2.0, 0.5]), (100, 2, 2)).copy()
        exps, stderr, pairing, sumres, total, _ = qr_product_exponents(factors, 1.0)
        assert exps[0] == pytest.approx(math.log(2.0), rel=1e-12)
        assert pairing <= 1e-12
        assert total == 100.0

    def test_rank_collapse_detected(self):
        from sympcocycle.errors import NumericalDegeneracyError

        factors = np.broadcast_to(np.array([[1.0, 0.0], [1.0, 0.0]]), (10, 2, 2)).copy()
        with pytest.raises(NumericalDegeneracyError):
            qr_product_exponents(factors, 1.0)


class TestScalingLaw:
    def test_constant_field_constant_roof(self, cat, roof2):
        a = 0.3
        f = GeneratorField.diag_hyperbolic(1, a)
        lhs, rhs, rel = scaling_law_check(f, cat, roof2, X0, 300, h=5e-3)
        assert lhs == pytest.approx(a, abs=1e-6)
        assert rhs == pytest.approx(a, abs=1e-6)
        assert rel <= 1e-6

    def test_zero_field(self, cat, bump_roof):
        f = GeneratorField.zero(1)
        lhs, rhs, rel = scaling_law_check(f, cat, bump_roof, X0, 200, h=1e-2)
        assert lhs == 0.0 and rhs == 0.0 and rel == 0.0

    def test_bump_roof_generic_field(self, cat, bump_roof):
        f = GeneratorField.diag_hyperbolic(1, 0.15).add(
            GeneratorField.random(1, seed=19, scale=0.1))
        lhs, rhs, rel = scaling_law_check(f, cat, bump_roof, X0, 20000, h=1e-2)
        assert rel <= 0.02


class TestPoincare:
    def test_unit_roof_exponents(self, cat):
        r = poincare_flow_exponents(cat, ConstantRoof(1.0),
                                    SuspensionPoint(X0, 0.0), 4000.0)
        lam = math.log(CAT_EXPANSION)
        assert abs(r.exponents[0] - lam) <= 1e-3
        assert abs(r.exponents[1] + lam) <= 1e-3

    def test_double_roof_halves_exponents(self, cat):
        r = poincare_flow_exponents(cat, ConstantRoof(2.0),
                                    SuspensionPoint(X0, 0.0), 4000.0)
        lam = math.log(CAT_EXPANSION) / 2.0
        assert abs(r.exponents[0] - lam) <= 1e-3

    def test_bump_roof_scaling(self, cat, bump_roof):
        r = poincare_flow_exponents(cat, bump_roof, SuspensionPoint(X0, 0.0), 6000.0)
        expected = math.log(CAT_EXPANSION) / 2.0  # integral of the roof is c0 = 2
        assert abs(r.exponents[0] - expected) <= 5e-3

    def test_flow_direction_invariant(self, cat, bump_roof):
        # the vertical direction is fixed by every lap jump: zero exponent
        from sympcocycle.base import CAT_MATRIX

        L = np.eye(3)
        L[:2, :2] = CAT_MATRIX
        L[2, 0] = 0.37  # arbitrary roof-gradient entry
        e3 = np.array([0.0, 0.0, 1.0])
        assert np.array_equal(L @ e3, e3)

    def test_requires_catmap(self, bump_roof):
        from sympcocycle.base import FullShift

        with pytest.raises(PreconditionError):
            poincare_flow_exponents(FullShift(), bump_roof,
                                    SuspensionPoint(X0, 0.0), 1000.0)
