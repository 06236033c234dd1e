import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import CATALOG_SAMPLES, FD_STEP, sample_points
from slowgrowth.integrands import (CatalogError, ParameterError, SingularPointError, catalog_entries,
                                   catalog_lookup, hess_quadform_aniso, hess_quadform_degenerate,
                                   hess_quadform_sqrt_sum, parse_integrand)


@pytest.fixture(params=CATALOG_SAMPLES)
def density(request):
    return parse_integrand(request.param)


class TestDerivatives:
    def test_gradient_matches_central_differences(self, density):
        xi = sample_points(density)
        g = density.grad(xi)
        fd = np.empty_like(xi)
        for i in range(xi.shape[1]):
            e = np.zeros(xi.shape[1])
            e[i] = FD_STEP
            fd[:, i] = (density.eval(xi + e) - density.eval(xi - e)) / (2 * FD_STEP)
        scale = np.linalg.norm(g, axis=1, keepdims=True)
        # relative tolerance with a unit floor, as in assert_allclose(rtol, atol)
        assert np.all(np.abs(fd - g) <= 1e-6 * np.maximum(scale, 1.0))

    def test_hessian_quadform_matches_differences(self, density):
        xi = sample_points(density, seed=1)
        rng = np.random.default_rng(2)
        lam = rng.standard_normal(xi.shape)
        lam /= np.linalg.norm(lam, axis=1, keepdims=True)
        q = density.hess_quadform(xi, lam)
        fd = np.einsum("pi,pi->p", lam, density.grad(xi + FD_STEP * lam) - density.grad(xi - FD_STEP * lam))
        fd /= 2 * FD_STEP
        scale = np.linalg.norm(density.hess(xi), axis=(1, 2))
        assert np.all(np.abs(fd - q) <= 1e-4 * np.maximum(scale, 1.0))

    def test_hessian_symmetric(self, density):
        H = density.hess(sample_points(density, 20))
        assert_allclose(H, np.swapaxes(H, -1, -2), rtol=0, atol=1e-12 * np.abs(H).max())

    def test_convex_on_samples(self, density):
        xi = sample_points(density, 200, seed=3)
        ev = np.linalg.eigvalsh(density.hess(xi))
        assert np.all(ev[:, 0] >= -1e-10 * np.maximum(ev[:, -1], 1))

    def test_vectorized_shapes(self, density):
        n = density.dim(None if density.n is not None else 2)
        xi = np.ones((3, 4, n)) * 1.7
        assert density.eval(xi).shape == (3, 4)
        assert density.grad(xi).shape == (3, 4, n)
        assert density.hess(xi).shape == (3, 4, n, n)


class TestTrivialValues:
    def test_aniso_constant_gradient(self):
        f = parse_integrand("aniso_power_sum(pi=[2, 2])")
        assert float(f.eval(np.array([1.0, 1.0]))) == pytest.approx(4.0, rel=1e-15)

    def test_sqrt_sum_value(self):
        f = parse_integrand("sqrt_power_sum(pi=[1, 1])")
        assert float(f.eval(np.array([3.0, 4.0]))) == pytest.approx(math.sqrt(27), rel=1e-15)

    def test_log_power_at_e(self):
        f = parse_integrand("log_power(a=1, t0=1)")
        assert float(f.eval(np.array([math.e, 0.0]))) == pytest.approx(math.e, rel=1e-15)

    def test_power_regularized_origin(self):
        f = parse_integrand("power_regularized(p=2)")
        assert float(f.eval(np.zeros(2))) == 1.0
        assert_allclose(f.hess(np.zeros(2)), 2 * np.eye(2), rtol=1e-15)

    def test_log_power_continuation_is_nonnegative(self):
        f = parse_integrand("log_power(a=1)")
        t = np.linspace(0, 3, 301)
        assert np.all(f.eval(np.stack([t, 0 * t], 1)) >= 0)

    def test_degenerate_zero_gradient_near_origin(self):
        f = parse_integrand("degenerate_radicand(pi=[1.5, 2])")
        assert_allclose(f.grad(np.array([1e-14, 0.0])), 0.0)
        assert_allclose(f.hess(np.array([1e-14, 0.0])), 0.0)


class TestFormulaCrossChecks:
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), st.lists(st.floats(-1, 1), min_size=2, max_size=2))
    @settings(max_examples=60, deadline=None)
    def test_aniso_formula(self, xi, lam):
        f = parse_integrand("aniso_power_sum(pi=[1.5, 2])")
        xi, lam = np.array(xi), np.array(lam)
        assert hess_quadform_aniso(xi, lam, [1.5, 2]) == pytest.approx(f.hess_quadform(xi, lam), rel=1e-12, abs=1e-14)

    @given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    @settings(max_examples=60, deadline=None)
    def test_sqrt_sum_formula(self, xi, lam):
        p = [1.2, 1.6, 2.0]
        f = catalog_lookup("sqrt_power_sum", {"pi": p})
        xi, lam = np.array(xi), np.array(lam)
        assert hess_quadform_sqrt_sum(xi, lam, p) == pytest.approx(f.hess_quadform(xi, lam), rel=1e-10, abs=1e-12)

    def test_degenerate_formula(self):
        p = [1.5, 2.0]
        f = catalog_lookup("degenerate_radicand", {"pi": p})
        rng = np.random.default_rng(4)
        xi, lam = rng.standard_normal((50, 2)) * 3, rng.standard_normal((50, 2))
        assert_allclose(hess_quadform_degenerate(xi, lam, p), f.hess_quadform(xi, lam), rtol=1e-11, atol=1e-13)

    def test_degenerate_formula_singular_at_origin(self):
        with pytest.raises(SingularPointError):
            hess_quadform_degenerate(np.zeros(2), np.ones(2), [1.5, 2])

    def test_degenerate_vanishes_along_xi_when_linear(self):
        # all p_i = 1: h = |xi| is 1-homogeneous, so Q(xi, xi) = 0
        xi = np.array([0.3, -1.7])
        assert hess_quadform_degenerate(xi, xi, [1, 1]) == pytest.approx(0.0, abs=1e-14)

    def test_sqrt_sum_lower_envelope_holds_on_axis(self):
        f = parse_integrand("sqrt_power_sum(pi=[1.5, 2])")
        t = np.geomspace(1, 1e4, 40)
        xi = np.stack([t, 0 * t], 1)
        lo = np.linalg.eigvalsh(f.hess(xi))[:, 0]
        assert np.all(lo >= f.lower_envelope(t) * (1 - 1e-12))


class TestValidation:
    @pytest.mark.parametrize("spec", [
        "aniso_power_sum(pi=[2.5, 1.5])",
        "aniso_power_sum(pi=[1.0, 1.5])",
        "power_regularized(p=1)",
        "log_power(a=-1)",
        "iterated_log(k=0)",
        "sqrt_power_sum(pi=[0.5, 1])",
    ])
    def test_out_of_range(self, spec):
        with pytest.raises(ParameterError):
            parse_integrand(spec)

    @pytest.mark.parametrize("spec", ["nope(p=2)", "power_regularized(q=2)", "power_regularized(p=2"])
    def test_bad_names_and_syntax(self, spec):
        with pytest.raises((CatalogError, ValueError)):
            parse_integrand(spec)

    def test_catalog_lists_every_entry(self):
        names = {name for name, _, _ in catalog_entries()}
        assert {"power_regularized", "log_power", "iterated_log", "aniso_power_sum",
                "sqrt_power_sum", "p_plus_h"} <= names

    def test_immutable_params(self):
        f = parse_integrand("power_regularized(p=1.5)")
        with pytest.raises(TypeError):
            f.params["p"] = 3


class TestParser:
    @given(st.floats(1.01, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_round_trip(self, p):
        f = parse_integrand(f"power_regularized(p={p!r})")
        assert parse_integrand(f.spec_string).spec_string == f.spec_string

    def test_list_parameter(self):
        f = parse_integrand("aniso_power_sum(pi=[1.25, 1.75, 2])")
        assert f.n == 3
        assert parse_integrand(f.spec_string).spec_string == f.spec_string
