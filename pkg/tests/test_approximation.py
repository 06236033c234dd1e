import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from slowgrowth.approximation import (Mollifier, bump_mass, build_fk, build_ftilde_k, cutoff, energy_convergence_check,
                                      ftilde_upper_bound_check, grid_kernel, mollify_grid, perturbation_h, sample_ball)
from slowgrowth.grid import GridFunction
from slowgrowth.integrands import ParameterError, parse_integrand

P15 = parse_integrand("power_regularized(p=1.5)")


class TestProfiles:
    def test_h_junction(self):
        h, dh, d2h = perturbation_h(1.0)
        assert abs(h - 1) <= 1e-12 and abs(dh - 1) <= 1e-12 and abs(d2h) <= 1e-12

    def test_h_one_sided_limits(self):
        lo = [float(v) for v in perturbation_h(1 - 1e-9)]
        hi = [float(v) for v in perturbation_h(1 + 1e-9)]
        assert_allclose(lo, hi, atol=1e-8)

    @given(st.floats(0, 5))
    @settings(max_examples=50, deadline=None)
    def test_h_convex_and_increasing(self, t):
        _, dh, d2h = perturbation_h(t)
        assert dh >= 0 and d2h >= 0

    def test_h_derivatives_match_differences(self):
        t = np.linspace(0.05, 3, 40)
        e = 1e-6
        h, dh, d2h = perturbation_h(t)
        assert_allclose((perturbation_h(t + e)[0] - perturbation_h(t - e)[0]) / (2 * e), dh, atol=1e-8)
        assert_allclose((perturbation_h(t + e)[1] - perturbation_h(t - e)[1]) / (2 * e), d2h, atol=1e-8)

    def test_cutoff_plateaus(self):
        phi = cutoff(np.array([0.0, 1.9, 2.0, 2.5, 2.6, 10.0]), t0=1.0)[0]
        assert_allclose(phi, [1, 1, 1, 0, 0, 0])
        mid = cutoff(np.array([2.1, 2.25, 2.4]), t0=1.0)[0]
        assert np.all(np.diff(mid) < 0)


class TestMollifier:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_unit_mass(self, d):
        eta = Mollifier(d)
        if d == 1:
            val, _ = quad(lambda x: float(eta(np.array([x]))), -1, 1, epsabs=0, epsrel=1e-12)
        else:
            # radial integral against the sphere area
            area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
            val, _ = quad(lambda r: float(eta(np.r_[r, np.zeros(d - 1)])) * r ** (d - 1), 0, 1, epsrel=1e-12)
            val *= area
        assert val == pytest.approx(1.0, rel=1e-10)

    def test_mass_1d_closed_check(self):
        assert bump_mass(1) == pytest.approx(2 * quad(lambda x: math.exp(-1 / (1 - x * x)), 0, 1)[0], rel=1e-12)

    def test_gradient_matches_differences(self):
        eta = Mollifier(2)
        z = sample_ball(2, 30, 0.9, seed=1)
        e = 1e-6
        _, g, H = eta.derivatives(z)
        for i in range(2):
            dz = np.zeros(2)
            dz[i] = e
            assert_allclose((eta(z + dz) - eta(z - dz)) / (2 * e), g[:, i], atol=1e-7)
            assert_allclose((eta.derivatives(z + dz)[1] - eta.derivatives(z - dz)[1]) / (2 * e), H[:, i], atol=1e-6)


@pytest.fixture(scope="module")
def fk8():
    return build_fk(P15, 8, n=2)


class TestFk:
    def test_rejects_small_k(self):
        with pytest.raises(ParameterError):
            build_fk(P15, 1, n=2)

    def test_exact_outside(self, fk8):
        pts = sample_ball(2, 300, P15.t0 + 6, seed=2)
        far = pts[np.linalg.norm(pts, axis=1) >= P15.t0 + 2]
        assert np.array_equal(fk8.eval(far), P15.eval(far))
        assert np.array_equal(fk8.grad(far), P15.grad(far))

    def test_gap_shrinks_like_inverse_square(self):
        pts = sample_ball(2, 40, P15.t0 + 2, seed=3)
        gaps = [np.max(np.abs(build_fk(P15, k, n=2).eval(pts) - P15.eval(pts))) for k in (4, 8, 16)]
        assert gaps[0] <= 1 and gaps[1] < gaps[0] and gaps[2] < gaps[1]
        assert gaps[2] * 16**2 <= 4 * gaps[0] * 4**2

    def test_gradient_matches_differences(self, fk8):
        xi = sample_ball(2, 12, P15.t0 + 2, seed=4)
        e = 1e-5
        g = fk8.grad(xi)
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = e
            fd = (fk8.eval(xi + dx) - fk8.eval(xi - dx)) / (2 * e)
            assert_allclose(fd, g[:, i], atol=1e-5 * max(1, np.abs(g).max()))

    def test_ftilde_adds_radial_perturbation(self, fk8):
        ft = build_ftilde_k(fk8, 8)
        xi = np.array([[0.3, 0.4], [5.0, 1.0]])
        c = P15.t0 + 2
        expected = fk8.eval(xi) + perturbation_h(np.linalg.norm(xi, axis=1) / c)[0] / 8
        assert_allclose(ft.eval(xi), expected, rtol=1e-14)

    def test_ftilde_upper_bound(self):
        res = ftilde_upper_bound_check(P15, 64, n=2, n_dirs=64)
        assert res["applies"] and res["passed"]


class TestGridMollification:
    def test_kernel_normalized(self):
        K = grid_kernel(0.1, 1 / 64)
        assert K.sum() == pytest.approx(1.0, rel=1e-14)
        assert_allclose(K, K[::-1, ::-1], rtol=1e-14)

    def test_identity_below_mesh(self):
        u = GridFunction.from_function(lambda x, y: np.sin(3 * x) * y, 16)
        assert np.array_equal(mollify_grid(u, 0.01).values, u.values)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([0.05, 0.1, 0.2]))
    @settings(max_examples=20, deadline=None)
    def test_preserves_affine(self, a, b, c, eps):
        u = GridFunction.from_function(lambda x, y: a * x + b * y + c, 32)
        ue = mollify_grid(u, eps)
        assert_allclose(ue.values[ue.valid], u.values[ue.valid], atol=1e-12 * (1 + abs(a) + abs(b) + abs(c)))

    def test_too_large_eps(self):
        with pytest.raises(ValueError):
            mollify_grid(GridFunction.from_function(lambda x, y: x, 8), 0.6)

    def test_jensen_dominance_and_gap(self):
        u = GridFunction.from_function(lambda x, y: 3 * (x - 0.5) ** 2 - (y - 0.5) ** 2 + np.abs(x - 0.5), 64)
        tab = energy_convergence_check(P15, u, 0.15, [0.2, 0.1, 0.05, 0.025])
        assert tab.dominance_ok and tab.worst_excess <= 1e-10
        gaps = [r[3] for r in tab.rows]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
