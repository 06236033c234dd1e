import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from slowgrowth.apriori import saddle
from slowgrowth.grid import GridFunction, read_grid, write_grid
from slowgrowth.integrands import parse_integrand
from slowgrowth.solver import (RadialOracle, annulus_gradient_comparison, annulus_problem, ball_area, discretize,
                               energy, interior_sup_gradient, local_energy_mean, minimize)

QUADRATIC = parse_integrand("power_regularized(p=2)")
P15 = parse_integrand("power_regularized(p=1.5)")


@pytest.fixture(scope="module")
def saddle_p15():
    return minimize(discretize(P15, lambda x, y: 4 * saddle(x, y), 32))


class TestExactness:
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=15, deadline=None)
    def test_affine_data_reproduced(self, a, b, c):
        prob = discretize(QUADRATIC, lambda x, y: a * x + b * y + c, 16)
        res = minimize(prob, tol=1e-12)
        assert_allclose(res.u.values, prob.data.values, rtol=0, atol=1e-12 * (1 + abs(a) + abs(b) + abs(c)))

    def test_affine_for_nonquadratic_density(self):
        prob = discretize(P15, lambda x, y: 2 * x - y, 16)
        assert_allclose(minimize(prob, tol=1e-12).u.values, prob.data.values, atol=1e-11)

    def test_harmonic_saddle(self):
        # x^2 - y^2 is harmonic and Q1 on the uniform grid reproduces it at the nodes
        prob = discretize(QUADRATIC, saddle, 16)
        assert_allclose(minimize(prob, tol=1e-12).u.values, prob.data.values, atol=1e-11)


class TestMinimizer:
    def test_energy_descent(self, saddle_p15):
        e = saddle_p15.energy_history
        assert all(b <= a for a, b in zip(e, e[1:]))
        assert saddle_p15.converged

    def test_minimal_under_perturbation(self, saddle_p15):
        prob = discretize(P15, lambda x, y: 4 * saddle(x, y), 32)
        rng = np.random.default_rng(0)
        for _ in range(5):
            phi = rng.standard_normal(saddle_p15.u.values.shape) * 1e-3
            phi[prob.fixed] = 0
            assert energy(prob, saddle_p15.u.values + phi) >= saddle_p15.energy - 1e-12

    def test_maximum_principle(self, saddle_p15):
        prob = discretize(P15, lambda x, y: 4 * saddle(x, y), 32)
        bd = prob.data.values[prob.fixed]
        u = saddle_p15.u.values
        assert u.max() <= bd.max() + 1e-10 and u.min() >= bd.min() - 1e-10

    def test_quadratic_is_linear_in_data(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((17, 17))
        one = minimize(discretize(QUADRATIC, GridFunction(g)), tol=1e-12).u.values
        two = minimize(discretize(QUADRATIC, GridFunction(2 * g)), tol=1e-12).u.values
        assert_allclose(two, 2 * one, atol=1e-10)

    def test_sup_grad_and_mean_recorded(self, saddle_p15):
        assert 0.15 in saddle_p15.sup_grad and (0.15, 0.35) in saddle_p15.local_mean
        assert saddle_p15.sup_grad[0.15] > 0


class TestMeshRefinement:
    def test_sup_grad_differences_shrink(self):
        s = {N: minimize(discretize(P15, lambda x, y: 4 * saddle(x, y), N)).sup_grad[0.15] for N in (64, 128, 256)}
        assert abs(s[64] - s[128]) < 2 * abs(s[128] - s[256])


class TestLocalQuantities:
    def test_affine_sup_grad(self):
        u = GridFunction.from_function(lambda x, y: 3 * x + 4 * y, 32)
        assert interior_sup_gradient(u, 0.2) == pytest.approx(5.0, rel=1e-13)

    def test_constant_mean(self):
        u = GridFunction.from_function(lambda x, y: 0 * x, 32)
        mean = local_energy_mean(u, QUADRATIC, 0.15, 0.35)
        # f(0) = 1 for the regularized power, so the integrand is 2
        assert mean == pytest.approx(2 * ball_area(32, 0.35) / 0.2**2, rel=1e-13)

    def test_ball_area_converges(self):
        assert ball_area(256, 0.3) == pytest.approx(np.pi * 0.09, rel=1e-3)

    def test_bad_radii(self):
        u = GridFunction.from_function(lambda x, y: x, 8)
        with pytest.raises(ValueError):
            local_energy_mean(u, QUADRATIC, 0.3, 0.2)
        with pytest.raises(ValueError):
            interior_sup_gradient(u, 0.01)


class TestValidation:
    def test_three_dimensional_density_rejected(self):
        with pytest.raises(ValueError):
            discretize(parse_integrand("aniso_power_sum(pi=[1.5, 1.5, 2])"), saddle, 8)

    def test_callable_needs_N(self):
        with pytest.raises(ValueError):
            discretize(QUADRATIC, saddle)


class TestRadialOracle:
    def test_quadratic_oracle_is_logarithmic(self):
        orc = RadialOracle(lambda s: 2 * s, 0.2, 0.5, 0.0, 1.0)
        r = np.array([0.25, 0.3, 0.4])
        assert_allclose(orc.value(r), np.log(r / 0.2) / np.log(2.5), rtol=1e-8)

    def test_boundary_values(self):
        orc = RadialOracle(P15.profile.dg, 0.2, 0.5, 0.0, 1.0)
        assert_allclose(orc.value(np.array([0.2, 0.5])), [0.0, 1.0], atol=1e-9)

    def test_annulus_gradient_close(self):
        orc = RadialOracle(P15.profile.dg, 0.2, 0.5, 0.0, 1.0)
        prob = annulus_problem(P15, orc, 64)
        res = minimize(prob)
        sd, so = annulus_gradient_comparison(res.u, prob.fixed, orc, 0.45)
        assert abs(sd / so - 1) < 0.03


class TestGridIO:
    def test_round_trip(self, tmp_path):
        u = GridFunction.from_function(lambda x, y: np.sin(x) * y, 9)
        write_grid(tmp_path / "u.txt", u, {"integrand": "x"})
        v, meta = read_grid(tmp_path / "u.txt")
        assert np.array_equal(u.values, v.values)
        assert meta["N"] == 9 and meta["integrand"] == "x"
