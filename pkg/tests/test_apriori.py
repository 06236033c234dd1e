import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from slowgrowth.apriori import (cumulative_quad, fit_slope, g1g2_integral_check, interpolation_lemma_check,
                                lemmapaolo_check, plus_one_slack, power_moment, saddle, scaling_study, spike,
                                step1_inequality_probe)
from slowgrowth.grid import GridFunction
from slowgrowth.integrands import parse_integrand
from slowgrowth.solver import ball_area, discretize, minimize


class TestScaling:
    def test_fit_slope_exact_power(self):
        m = np.geomspace(1, 100, 8)
        assert fit_slope(3 * m**0.4, m) == pytest.approx(0.4, rel=1e-12)

    def test_quadratic_slope_is_one_half(self):
        f = parse_integrand("power_regularized(p=2)")
        st_ = scaling_study(f, 0.5, scales=np.geomspace(4, 64, 5), N=32)
        assert abs(st_.fitted_slope - 0.5) <= 0.05
        assert st_.bound_holds and st_.slope_ok

    def test_scales_validated(self):
        f = parse_integrand("power_regularized(p=2)")
        with pytest.raises(ValueError):
            scaling_study(f, 0.5, scales=[4, 8, 16])
        with pytest.raises(ValueError):
            scaling_study(f, 0.5, scales=[64, 4])


class TestInterpolation:
    def test_constant_field(self):
        one = lambda x, y: np.ones_like(x)  # noqa: E731
        chk = interpolation_lemma_check([one], 2.0, [0.9, 0.7], radius_pairs=((0.1, 0.3),), N=64)
        expected = 0.2**2 / ball_area(64, 0.3)
        assert chk.premise_c == pytest.approx(expected, rel=1e-12)
        assert_allclose(chk.conclusion_c, expected, rtol=1e-12)

    def test_lambda_range_enforced(self):
        with pytest.raises(ValueError):
            interpolation_lemma_check([spike(2.0)], 2.0, [0.4])

    def test_spike_family_finite(self):
        chk = interpolation_lemma_check([spike(g) for g in (1, 4)], 2.0, [0.9, 0.6], N=64)
        assert chk.finite


class TestIntegralLemmas:
    @given(st.floats(0.2, 30.0), st.floats(0.0, 50.0))
    @settings(max_examples=30, deadline=None)
    def test_power_moment_matches_quadrature(self, alpha, t):
        num = cumulative_quad(lambda s: (1 + s) ** (alpha - 2) * s, [t])[0]
        assert num == pytest.approx(float(power_moment(alpha, t)), rel=1e-9, abs=1e-14)

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_power_moment_special_cases(self, alpha):
        t = np.array([0.5, 3.0])
        num = cumulative_quad(lambda s: (1 + s) ** (alpha - 2) * s, t)
        assert_allclose(num, power_moment(alpha, t), rtol=1e-10)

    def test_lemmapaolo_bounded(self):
        tab = lemmapaolo_check()
        assert tab.passed and tab.oracle_error <= 1e-8
        assert tab.extra["sup_c"] < 10

    def test_lemmapaolo_validates_alpha(self):
        with pytest.raises(ValueError):
            lemmapaolo_check(alphas=(0.25,))

    def test_g1g2_oracle(self):
        one = lambda t: 1.0  # noqa: E731
        tab = g1g2_integral_check(one, one, 0.5, 2.5, oracle=True)
        assert tab.passed and tab.oracle_error <= 1e-8
        assert min(tab.constants) > 0

    def test_g1g2_rejects_nonpositive_exponent(self):
        one = lambda t: 1.0  # noqa: E731
        with pytest.raises(ValueError):
            g1g2_integral_check(one, one, 1.5, 2.5, gammas=(0,))


class TestStepOne:
    def test_small_gradient_reduces_to_area(self):
        u = GridFunction.from_function(lambda x, y: 0.5 * x, 32)
        g2 = lambda t: t ** -0.5  # noqa: E731
        res = step1_inequality_probe(u, g2, 0.5)
        assert res["lhs"] == 1.0
        assert res["c4"] == pytest.approx(0.2**2 / ball_area(32, 0.35), rel=1e-12)

    def test_c4_bounded_across_scales(self):
        f = parse_integrand("power_regularized(p=1.5)")
        g2 = lambda t: (1 + t * t) ** -0.25  # noqa: E731
        c4 = [step1_inequality_probe(minimize(discretize(f, lambda x, y: s * saddle(x, y), 32)).u, g2, 0.55)["c4"]
              for s in (1, 4, 16, 64)]
        assert all(0 < c < 1 for c in c4)

    def test_plus_one_slack(self):
        g2 = lambda t: (1 + t * t) ** -0.25  # noqa: E731
        assert plus_one_slack(g2, [1.0])[0] == pytest.approx(0.0, abs=1e-14)
        assert np.all(plus_one_slack(g2, np.geomspace(1, 100, 20)) >= -1e-12)
