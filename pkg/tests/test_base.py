import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sympcocycle.base import (
    CAT_EXPANSION,
    CAT_MATRIX,
    CatMap,
    ConstantRoof,
    CosineBumpRoof,
    FullShift,
    PeriodicOrbit,
    SuspensionPoint,
    TorusPoint,
    base_apply,
    heteroclinic_point_catmap,
    periodic_points_catmap,
    roof_integral,
    roof_sum,
    suspend_flow,
)
from sympcocycle.errors import (
    PreconditionError,
    ResourceLimitError,
    TruncationError,
)


class TestCatMap:
    def test_origin_fixed(self, cat):
        p = TorusPoint(Fraction(0), Fraction(0))
        assert base_apply(cat, p, 5) == p

    def test_rational_step(self, cat):
        # integer matrix times (1/5, 2/5) mod 1
        p = TorusPoint(Fraction(1, 5), Fraction(2, 5))
        fp = base_apply(cat, p, 1)
        assert fp == TorusPoint(Fraction(4, 5), Fraction(3, 5))

    def test_inverse_matrix(self, cat):
        p = TorusPoint(Fraction(3, 7), Fraction(5, 7))
        assert base_apply(cat, base_apply(cat, p, 4), -4) == p

    def test_float_iteration_wraps(self, cat):
        p = TorusPoint(0.9, 0.8)
        fp = base_apply(cat, p, 1)
        assert 0.0 <= float(fp.u) < 1.0 and 0.0 <= float(fp.v) < 1.0

    def test_distance_wraps(self, cat):
        assert cat.distance(TorusPoint(0.01, 0.5), TorusPoint(0.99, 0.5)) == pytest.approx(0.02)


class TestFullShift:
    def test_constant_sequence_fixed(self):
        sh = FullShift(symbols=2, depth=8)
        p = sh.make_point([1] * 17)
        for n in (1, 3, -2):
            assert sh.apply(p, n).symbol(0) == 1

    def test_metric(self):
        sh = FullShift(symbols=2, depth=8)
        a = sh.make_point([0] * 17)
        b_sym = [0] * 17
        b_sym[8 + 3] = 1  # differ first at index +3
        b = sh.make_point(b_sym)
        assert sh.distance(a, b) == 2.0 ** -3

    def test_truncation_error(self):
        sh = FullShift(symbols=2, depth=4)
        p = sh.make_point([0] * 9)
        with pytest.raises(TruncationError):
            sh.apply(p, 5)

    def test_coords_in_unit_square(self):
        sh = FullShift(symbols=3, depth=16)
        p = sh.make_point(list(range(3)) * 11)
        u, v = sh.coords(p)
        assert 0.0 <= u < 1.0 and 0.0 <= v < 1.0


class TestRoofs:
    def test_roof_must_dominate_one(self):
        with pytest.raises(PreconditionError):
            ConstantRoof(0.5)
        with pytest.raises(PreconditionError):
            CosineBumpRoof(1.2, 0.5)

    def test_constant_sum(self, cat):
        roof = ConstantRoof(1.5)
        p = TorusPoint(0.3, 0.4)
        assert roof_sum(roof, cat, p, 7) == pytest.approx(7 * 1.5)
        assert roof_sum(roof, cat, p, 1) == pytest.approx(roof.value(cat, p))

    def test_bump_sum_matches_two_evaluations(self, cat):
        # direct-summation oracle at a period-2 point
        roof = CosineBumpRoof(2.0, 0.5)
        orbits = [o for o in periodic_points_catmap(2) if o.period == 2]
        p = orbits[0].point
        expected = roof.value(cat, p) + roof.value(cat, base_apply(cat, p, 1))
        assert roof_sum(roof, cat, p, 2) == pytest.approx(expected, rel=1e-15)

    def test_lipschitz_bound_holds(self, cat):
        roof = CosineBumpRoof(2.0, 0.5)
        rng = np.random.default_rng(0)
        for _ in range(300):
            x = cat.random_point(rng)
            y = cat.random_point(rng)
            d = cat.distance(x, y)
            assert abs(roof.value(cat, x) - roof.value(cat, y)) <= roof.lipschitz * d + 1e-12


class TestSuspension:
    def test_zero_time_identity(self, cat, roof2):
        pt = SuspensionPoint(TorusPoint(0.2, 0.7), 0.3)
        out = suspend_flow(cat, roof2, pt, 0.0)
        assert out.base == pt.base and out.height == pt.height

    def test_one_full_lap(self, cat, roof2):
        p = TorusPoint(0.2, 0.7)
        out = suspend_flow(cat, roof2, SuspensionPoint(p, 0.0), roof2.c)
        assert out.base == base_apply(cat, p, 1)
        assert out.height == pytest.approx(0.0, abs=1e-12)

    def test_lap_counting(self, cat, roof2):
        # 2.5 laps of a constant-2 roof: base advances twice, height 1.0
        p = TorusPoint(0.2, 0.7)
        out = suspend_flow(cat, roof2, SuspensionPoint(p, 0.0), 2.5 * roof2.c)
        assert out.base == base_apply(cat, p, 2)
        assert out.height == pytest.approx(0.5 * roof2.c, abs=1e-12)

    @given(st.floats(-20, 20), st.floats(-20, 20),
           st.floats(0, 0.999), st.floats(0, 0.999))
    @settings(max_examples=200, deadline=None)
    def test_flow_property(self, t, s, u0, v0):
        # float base points reached along different lap paths agree only
        # up to rounding, so "equal base" means metrically equal
        cat = CatMap()
        roof = CosineBumpRoof(2.0, 0.5)
        pt = SuspensionPoint(TorusPoint(u0, v0), 0.1)
        one = suspend_flow(cat, roof, suspend_flow(cat, roof, pt, t), s)
        two = suspend_flow(cat, roof, pt, t + s)
        assert cat.distance(one.base, two.base) <= 1e-12
        assert abs(one.height - two.height) <= 1e-12

    def test_invertibility(self, cat, bump_roof):
        rng = np.random.default_rng(3)
        for _ in range(200):
            pt = SuspensionPoint(cat.random_point(rng),
                                 rng.uniform(0, 1.4))
            t = rng.uniform(-20, 20)
            back = suspend_flow(cat, bump_roof, suspend_flow(cat, bump_roof, pt, t), -t)
            assert cat.distance(back.base, pt.base) <= 1e-12
            assert abs(back.height - pt.height) <= 1e-12


def _trace_power(n):
    M = np.eye(2, dtype=object)
    A = np.array([[2, 1], [1, 1]], dtype=object)
    for _ in range(n):
        M = M @ A
    return int(M[0, 0] + M[1, 1])


class TestPeriodicPoints:
    def test_period_one(self):
        orbits = periodic_points_catmap(1)
        assert len(orbits) == _trace_power(1) - 2 == 1
        assert orbits[0].point == TorusPoint(Fraction(0), Fraction(0))

    @pytest.mark.parametrize("n", range(1, 9))
    def test_counts_match_trace_formula(self, n):
        assert len(periodic_points_catmap(n)) == _trace_power(n) - 2

    def test_points_exactly_periodic(self, cat):
        for orbit in periodic_points_catmap(4):
            assert base_apply(cat, orbit.point, orbit.period) == orbit.point

    def test_flow_period_uses_roof(self, cat):
        roof = CosineBumpRoof(2.0, 0.5)
        for orbit in periodic_points_catmap(2, roof=roof, sys=cat):
            expected = roof_sum(roof, cat, orbit.point, orbit.period)
            assert orbit.flow_period == pytest.approx(expected, rel=1e-15)

    def test_resource_guard(self):
        with pytest.raises(ResourceLimitError):
            periodic_points_catmap(13)


@pytest.fixture(scope="module")
def fixed():
    return periodic_points_catmap(1)[0]


class TestHeteroclinic:

    def test_homoclinic_exists_and_exact(self, cat, fixed):
        z = heteroclinic_point_catmap(fixed, fixed)
        assert z != fixed.point
        u, v = z.coords()
        assert 0.0 <= u < 1.0 and 0.0 <= v < 1.0
        assert z.exact

    def test_forward_backward_convergence(self, cat, fixed):
        z = heteroclinic_point_catmap(fixed, fixed)
        fwd = z
        for _ in range(30):
            fwd = base_apply(cat, fwd, 1)
        assert cat.distance(fwd, fixed.point) < 1e-6
        bwd = z
        for _ in range(30):
            bwd = base_apply(cat, bwd, -1)
        assert cat.distance(bwd, fixed.point) < 1e-6

    def test_contraction_rate(self, cat, fixed):
        # d(f^n z, q-orbit) <= K lambda^{-n} with the exact expansion rate
        z = heteroclinic_point_catmap(fixed, fixed)
        d0 = cat.distance(z, fixed.point)
        pt = z
        for n in range(1, 26):
            pt = base_apply(cat, pt, 1)
            d = cat.distance(pt, fixed.point)
            assert d <= 3.0 * d0 * CAT_EXPANSION ** (-n)

    def test_distinct_periodic_pair(self, cat):
        two = [o for o in periodic_points_catmap(2) if o.period == 2]
        p, q = periodic_points_catmap(1)[0], two[0]
        z = heteroclinic_point_catmap(p, q)
        fwd, fq = z, q.point
        for _ in range(28):
            fwd = base_apply(cat, fwd, 1)
            fq = base_apply(cat, fq, 1)
        assert cat.distance(fwd, fq) < 1e-5


class TestRoofIntegral:
    def test_constant_exact(self, cat):
        val, err = roof_integral(ConstantRoof(1.7), cat, n_samples=10, seed=0)
        assert val == 1.7 and err == 0.0

    def test_bump_mean(self, cat):
        # the bump integrates to zero against Lebesgue: expect c0
        val, err = roof_integral(CosineBumpRoof(2.0, 0.5), cat, n_samples=40000, seed=1)
        assert abs(val - 2.0) <= 4.0 * err

    def test_convergence_rate(self, cat):
        roof = CosineBumpRoof(2.0, 0.5)
        errs = []
        for n in (1000, 16000):
            devs = []
            for seed in range(12):
                val, _ = roof_integral(roof, cat, n_samples=n, seed=seed)
                devs.append((val - 2.0) ** 2)
            errs.append(math.sqrt(np.mean(devs)))
        # rmse should shrink roughly like 1/sqrt(n): factor 4 for 16x samples
        assert errs[1] <= errs[0] / 2.0

    def test_shift_sampling(self):
        sh = FullShift(symbols=2, depth=16)
        val, err = roof_integral(CosineBumpRoof(2.0, 0.5), sh, n_samples=4000, seed=2)
        assert np.isfinite(val) and err > 0.0
