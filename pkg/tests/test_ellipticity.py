import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from slowgrowth.ellipticity import (ExponentSet, HypothesisParams, NonConvexityError, analyze, beta_bar,
                                    check_ab, check_H1, check_H2, check_H5, corollary_conditions,
                                    interpolation_form, iteration_schedule, remark_comparison,
                                    sample_growth_bounds, sobolev_exponent, sphere_directions, theta_ab)
from slowgrowth.integrands import EnergyDensity, parse_integrand

pq_pairs = st.tuples(st.integers(2, 8), st.floats(1.01, 2.0), st.floats(0.0, 1.0)).map(
    lambda t: (t[0], t[1], t[1] + t[2] * (2.0 - t[1])))


class Saddle(EnergyDensity):
    """Non-convex test density x^2 - y^2."""

    name = "saddle"

    def __init__(self):
        super().__init__({}, n=2)

    def eval(self, xi):
        xi = np.asarray(xi, float)
        return xi[..., 0] ** 2 - xi[..., 1] ** 2

    def grad(self, xi):
        xi = np.asarray(xi, float)
        return np.stack([2 * xi[..., 0], -2 * xi[..., 1]], -1)

    def hess(self, xi):
        xi = np.asarray(xi, float)
        return np.broadcast_to(np.diag([2.0, -2.0]), xi.shape + (2,)).copy()


class Linearish(EnergyDensity):
    """sqrt(1 + |xi|^2): convex with linear growth."""

    name = "linearish"

    def __init__(self):
        super().__init__({}, n=2)

    def eval(self, xi):
        return np.sqrt(1 + np.sum(np.asarray(xi, float) ** 2, -1))

    def grad(self, xi):
        xi = np.asarray(xi, float)
        return xi / self.eval(xi)[..., None]

    def hess(self, xi):
        xi = np.asarray(xi, float)
        s = self.eval(xi)[..., None, None]
        return np.eye(2) / s - xi[..., :, None] * xi[..., None, :] / s**3


class TestExponents:
    def test_check_ab_example(self):
        v, th = check_ab(mu=0.0, alpha=1.0, beta=0.5, n=2)
        assert v.passed and th == 2.0

    def test_check_ab_fails_when_denominator_nonpositive(self):
        v, th = check_ab(mu=0.0, alpha=2.0, beta=0.9, n=2)
        assert not v.passed and th == math.inf

    def test_theta_ab_closed_form(self):
        assert theta_ab(0.5, 1.5, 0.6, 2) == pytest.approx(1.5 * 1.5 / (1.5 - 1.5 * 0.7))

    @given(st.floats(0, 1), st.floats(1.0, 4.0), st.floats(0.51, 0.99))
    @settings(max_examples=100, deadline=None)
    def test_interpolation_form_equivalent(self, mu, alpha, beta):
        v, _ = check_ab(mu, alpha, beta, 2)
        ok, _, _ = interpolation_form(mu, alpha, beta, 2)
        margin = 2 - mu - alpha * (2 * beta - mu)
        if abs(margin) > 1e-12:
            assert ok == v.passed

    @given(pq_pairs)
    @settings(max_examples=200, deadline=None)
    def test_exponent_chain(self, npq):
        n, p, q = npq
        es = ExponentSet(n, p, q)
        assert es.r <= p + 1e-15 and p <= q and q <= es.s + 1e-15 and es.s <= 2 + 1e-15

    @given(pq_pairs)
    @settings(max_examples=200, deadline=None)
    def test_theta_ab_is_q_times_theta_pq(self, npq):
        n, p, q = npq
        es = ExponentSet(n, p, q)
        if (n + 2) * p - n * q <= 0.05:
            return
        th = theta_ab(2 - q, es.alpha_bar, es.beta_bar, n)
        assert th == pytest.approx(q * es.theta_pq, rel=1e-12)

    @given(pq_pairs)
    @settings(max_examples=200, deadline=None)
    def test_remark_ordering(self, npq):
        n, p, q = npq
        rc = remark_comparison(ExponentSet(n, p, q))
        # the thresholds differ by (2/n)(q - p), so q - p must exceed rounding
        if q - p > 1e-12:
            assert rc["threshold_pq"] < rc["threshold_ex1"]

    def test_beta_bar_vectorized(self):
        assert_allclose(beta_bar(3, np.array([1.5, 2.0]), np.array([1.5, 2.0])),
                        [ExponentSet(3, 1.5, 1.5).beta_bar, ExponentSet(3, 2.0, 2.0).beta_bar])

    def test_aniso_condition_n3(self):
        c = corollary_conditions(ExponentSet(3, 1.1, 2.0))
        assert not c["aniso"].passed
        assert c["aniso"].margin == pytest.approx(1.1 - 1.2)

    def test_ex1_forms_agree(self):
        for p, q in [(1.5, 1.7), (1.5, 2.0), (1.1, 1.3), (1.9, 2.0)]:
            c = corollary_conditions(ExponentSet(2, p, q))
            assert c["ex1"].passed == c["ex1_equiv"].passed

    def test_hypothesis_params_validation(self):
        with pytest.raises(ValueError):
            HypothesisParams(mu=0.2, beta=0.5, alpha=1.5, n=2)
        with pytest.raises(ValueError):
            HypothesisParams(mu=0.2, beta=0.7, alpha=1.0, n=2)
        hp = HypothesisParams(mu=0.2, beta=0.7, alpha=1.5, n=2)
        assert 2 / hp.sobolev < 1 - hp.beta

    def test_sobolev_exponent(self):
        assert sobolev_exponent(3) == 6.0
        assert sobolev_exponent(4) == 4.0
        with pytest.raises(ValueError):
            sobolev_exponent(2, 0.6, factor=1.0)


class TestIterationSchedule:
    def test_n4_first_step(self):
        s = iteration_schedule(4, Fraction(3, 8))
        assert s.recursion[1] == pytest.approx(2.5, abs=1e-15)
        assert s.limit == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("n,beta", [(3, 0.4), (3, 0.5), (4, 0.3)])
    def test_limit_and_closed_form(self, n, beta):
        s = iteration_schedule(n, beta)
        assert_allclose(s.recursion, s.closed_form, rtol=1e-9)
        assert abs(s.normalized[-1] - (2 - n * beta)) <= 1e-6

    def test_admissibility_boundary_exact(self):
        # n = 3: 2* = 6 so the boundary is beta = 2/3
        assert not iteration_schedule(3, Fraction(2, 3)).admissible
        assert iteration_schedule(3, Fraction(2, 3) - Fraction(1, 10**12)).admissible

    @given(st.integers(3, 10), st.floats(0.01, 0.99))
    @settings(max_examples=60, deadline=None)
    def test_admissible_iff_deltas_stay_above_two(self, n, frac):
        beta = frac * (1 - 2 * (n - 2) / (2 * n)) * 1.5
        s = iteration_schedule(n, beta, i_max=40)
        if abs(beta - (1 - 2 * (n - 2) / (2 * n))) > 1e-9 and s.admissible:
            assert np.all(s.recursion >= 2 - 1e-9)

    def test_limit_near_upper_beta(self):
        s = iteration_schedule(3, 2 / 3 - 1e-3)
        assert 0 < s.limit < 0.01


class TestSampling:
    def test_sphere_directions_unit(self):
        for n in (2, 3, 5):
            d = sphere_directions(n, 64, seed=1)
            assert_allclose(np.linalg.norm(d, axis=1), 1.0, rtol=1e-14)

    def test_deterministic(self):
        assert_allclose(sphere_directions(3, 32, 4), sphere_directions(3, 32, 4), rtol=0)

    def test_radial_bounds_match_exact(self):
        f = parse_integrand("power_regularized(p=1.5)")
        t = np.geomspace(1, 1e3, 30)
        s = sample_growth_bounds(f, t, n_dirs=64, n=2)
        g1, g2 = f.radial_g1g2(t)
        assert_allclose(s.g1, g1, rtol=1e-9)
        assert_allclose(s.g2, g2, rtol=1e-9)

    def test_aniso_extremes_bracket(self):
        f = parse_integrand("aniso_power_sum(pi=[1.5, 2])")
        s = sample_growth_bounds(f, np.geomspace(1, 1e3, 20), n_dirs=64)
        assert check_H1(s).passed

    def test_nonconvexity_witness(self):
        with pytest.raises(NonConvexityError) as exc:
            sample_growth_bounds(Saddle(), np.geomspace(1, 10, 5), n_dirs=64)
        assert exc.value.value < 0

    def test_h2_detects_increase(self):
        f = parse_integrand("power_regularized(p=2)")  # g2 constant: t^mu g2 increases for mu > 0
        s = sample_growth_bounds(f, np.geomspace(1, 100, 20), n_dirs=64, n=2)
        assert not check_H2(s, 0.5).passed
        assert check_H2(s, 0.0).passed

    def test_h5_rejects_linear_growth(self):
        assert not check_H5(Linearish(), np.geomspace(1, 1e6, 100), n_dirs=16).passed

    def test_h5_accepts_log_power(self):
        assert check_H5(parse_integrand("log_power(a=1)"), np.geomspace(2, 1e60, 400), n_dirs=16, n=2).passed


class TestAnalyze:
    def test_log_power_passes(self):
        rep = analyze(parse_integrand("log_power(a=1)"))
        assert rep.passed, rep.to_dict()["verdicts"]
        assert math.isfinite(rep.theta)

    def test_report_is_deterministic(self):
        f = parse_integrand("aniso_power_sum(pi=[1.5, 2])")
        assert analyze(f, n_t=60, n_dirs=64).to_dict() == analyze(f, n_t=60, n_dirs=64).to_dict()

    def test_explicit_params(self):
        rep = analyze(parse_integrand("power_regularized(p=1.5)"), mu=0.5, beta=0.7, alpha=1.3, n_t=60)
        assert rep.params["mu"] == 0.5 and rep.params["alpha"] == 1.3
        assert rep.sweep == {}
