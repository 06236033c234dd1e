"""Numerical checks of the a priori gradient estimate and its supporting lemmas.

Every "there exists a constant" statement is turned into the minimal
constant that is feasible on a declared grid; the checks report that
constant and whether it stays finite or stable.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from . import kernels
from .ellipticity import GrowthBoundSamples, iteration_schedule  # noqa: F401  (re-export)
from .grid import GridFunction, cell_centers, quadrature_points
from .integrands import EnergyDensity
from .solver import CENTER, DEFAULT_RADII, ConvergenceError, SolveResult, discretize, minimize

SLOPE_TOL = 0.05
QUAD_RTOL = 1e-10
RADIUS_PAIRS = ((0.05, 0.15), (0.1, 0.2), (0.1, 0.3), (0.15, 0.35), (0.2, 0.3), (0.25, 0.45))


def saddle(x, y):
    """Default base data (x - 1/2)^2 - (y - 1/2)^2."""
    return (x - CENTER[0]) ** 2 - (y - CENTER[1]) ** 2


# ---------------------------------------------------------------------------
# Scaling study


@dataclass(frozen=True)
class ScalingStudy:
    scales: tuple
    sup_grads: tuple
    means: tuple
    iterations: tuple
    fitted_slope: float
    theta: float
    fitted_C: float
    rho: float
    R: float
    N: int
    slope_tol: float = SLOPE_TOL

    @property
    def bound_holds(self) -> bool:
        return all(g <= self.fitted_C * m**self.theta * (1 + 1e-12) for g, m in zip(self.sup_grads, self.means))

    @property
    def slope_ok(self) -> bool:
        return self.fitted_slope <= self.theta + self.slope_tol

    def rows(self):
        return [(s, g, m, self.fitted_C * m**self.theta)
                for s, g, m in zip(self.scales, self.sup_grads, self.means)]

    def csv(self) -> str:
        lines = ["scale,sup_grad,mean,bound"]
        lines += [",".join(f"{v:.17g}" for v in row) for row in self.rows()]
        return "\n".join(lines) + "\n"


def fit_slope(sup_grads, means, top_half: bool = True) -> float:
    """Least-squares slope of log sup_grad against log mean, over the top half of the data."""
    x, y = np.log(np.asarray(means, float)), np.log(np.asarray(sup_grads, float))
    if top_half:
        start = len(x) // 2
        x, y = x[start:], y[start:]
    if len(x) < 2:
        raise ValueError("need at least two scales in the fitted range")
    return float(np.polyfit(x, y, 1)[0])


def scaling_study(f: EnergyDensity, theta: float, base: Callable = saddle, scales: Sequence[float] = None,
                  rho: float = DEFAULT_RADII[0], R: float = DEFAULT_RADII[1], N: int = 64, tol: float = 1e-8,
                  workers: int | None = None, slope_tol: float = SLOPE_TOL) -> ScalingStudy:
    """Solve with data s * base for each scale and fit sup |Du| against the local energy mean.

    Solves are independent; with ``workers`` they run in a thread pool (the
    sparse solves release the GIL). Without workers each solve is warm
    started from the previous scaled solution.
    """
    if scales is None:
        scales = tuple(np.geomspace(4, 64, 9))
    scales = tuple(float(s) for s in scales)
    if any(b <= a for a, b in zip(scales, scales[1:])) or scales[0] < 1:
        raise ValueError("scales must be strictly increasing and >= 1")
    if math.log10(scales[-1] / scales[0]) < 1.0:
        raise ValueError("scales must span at least one decade")

    def solve(s, init=None):
        prob = discretize(f, lambda x, y: s * base(x, y), N)
        return minimize(prob, tol=tol, init=init, radii=(rho, R))

    results: list[SolveResult] = []
    try:
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                results = list(ex.map(solve, scales))
        else:
            prev, prev_s = None, None
            for s in scales:
                init = None if prev is None else prev.u.values * (s / prev_s)
                prev = solve(s, init)
                prev_s = s
                results.append(prev)
    except ConvergenceError as exc:
        raise ConvergenceError(f"scaling study aborted after {len(results)} scales: {exc}", exc.history) from exc
    sup = tuple(r.sup_grad[rho] for r in results)
    mean = tuple(r.local_mean[(rho, R)] for r in results)
    slope = fit_slope(sup, mean)
    C = max(g / m**theta for g, m in zip(sup, mean))
    return ScalingStudy(scales, sup, mean, tuple(r.iterations for r in results), slope, float(theta),
                        float(C), rho, R, N, slope_tol)


# ---------------------------------------------------------------------------
# Interpolation lemma


def spike(gamma: float, amplitude: float = 1.0, center=CENTER):
    """Radial field amplitude * (1 + |x - center|)^(-gamma)."""

    def v(x, y):
        return amplitude * (1 + np.hypot(x - center[0], y - center[1])) ** (-gamma)

    return v


def _ball_stats(v: Callable, N: int, rho: float, R: float, lam: float | Sequence[float], center=CENTER):
    """sup of v over Gauss points of cells in B_rho and integrals of v^lam over B_R."""
    X, Y = cell_centers(N)
    d2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    qp = quadrature_points(N)
    vals = v(qp[..., 0], qp[..., 1])
    inner, outer = d2 <= rho * rho, d2 <= R * R
    if not inner.any():
        raise ValueError(f"no cell centre inside B_{rho} on an N={N} grid")
    sup = float(vals[inner].max())
    w = 1.0 / (4 * N * N)
    lam = np.atleast_1d(np.asarray(lam, float))
    ints = np.array([np.sum(np.abs(vals[outer]) ** l) * w for l in lam])
    return sup, ints


@dataclass(frozen=True)
class InterpolationCheck:
    theta_cap: float
    lambdas: tuple
    premise_c: float
    conclusion_c: tuple  # one fitted c_lambda per lambda
    radius_pairs: tuple
    N: int

    @property
    def finite(self) -> bool:
        return math.isfinite(self.premise_c) and all(math.isfinite(c) for c in self.conclusion_c)

    @property
    def monotone_growth(self) -> bool:
        """c_lambda strictly increases as lambda decreases toward (theta-1)/theta."""
        order = np.argsort(self.lambdas)[::-1]
        c = np.asarray(self.conclusion_c)[order]
        return bool(np.all(np.diff(c) > 0))


def interpolation_lemma_check(family: Sequence[Callable], theta_cap: float, lambdas, radius_pairs=RADIUS_PAIRS,
                              N: int = 128, center=CENTER) -> InterpolationCheck:
    """Minimal premise constant and uniform c_lambda for a family of nonnegative fields.

    Premise: ``sup_{B_rho} v^(1/theta) <= c (R - rho)^-2 int_{B_R} v``.
    Conclusion: ``sup_{B_rho} v^((1 - theta(1 - lambda))/theta) <= c_lambda (R - rho)^-2 int_{B_R} v^lambda``.
    Both constants are maxima over every family member and radius pair.
    """
    if theta_cap < 1:
        raise ValueError("theta_cap must be >= 1")
    lambdas = tuple(float(l) for l in np.atleast_1d(lambdas))
    lo = (theta_cap - 1) / theta_cap
    for l in lambdas:
        if not lo < l < 1:
            raise ValueError(f"lambda={l} outside ({lo}, 1)")
    lam_all = np.array((1.0,) + lambdas)
    exps = np.array([(1 - theta_cap * (1 - l)) / theta_cap for l in lambdas])
    premise, concl = 0.0, np.zeros(len(lambdas))
    for v in family:
        for rho, R in radius_pairs:
            sup, ints = _ball_stats(v, N, rho, R, lam_all, center)
            vol = (R - rho) ** 2
            premise = max(premise, sup ** (1 / theta_cap) * vol / ints[0])
            concl = np.maximum(concl, sup**exps * vol / ints[1:])
    return InterpolationCheck(float(theta_cap), lambdas, float(premise), tuple(float(c) for c in concl),
                              tuple(radius_pairs), N)


def interpolation_refinement(family, theta_cap, lambdas, Ns=(64, 128, 256), radius_pairs=RADIUS_PAIRS):
    """Checks on a sequence of grids and the largest relative drift of c_lambda from the coarsest grid."""
    checks = [interpolation_lemma_check(family, theta_cap, lambdas, radius_pairs, N) for N in Ns]
    base = np.asarray(checks[0].conclusion_c)
    drift = max(float(np.max(np.abs(np.asarray(c.conclusion_c) - base) / base)) for c in checks[1:])
    return checks, drift


# ---------------------------------------------------------------------------
# One-dimensional integral lemmas


def power_moment(alpha: float, t):
    """Closed form of the integral of (1+s)^(alpha-2) s over [0, t]."""
    t = np.asarray(t, dtype=float)
    L = np.log1p(t)
    if alpha == 1:
        return t - L
    if alpha == 0:
        return L - t / (1 + t)
    return np.expm1(alpha * L) / alpha - np.expm1((alpha - 1) * L) / (alpha - 1)


def _log_one_plus_moment_over_power(alpha: float, t):
    """log((1 + I(t)) / (1+t)^alpha) for the power moment I, stable for large alpha log(1+t)."""
    t = np.asarray(t, dtype=float)
    L = np.log1p(t)
    a = np.exp(-alpha * L)
    first = -np.expm1(-alpha * L) / alpha
    if alpha == 1:
        second = L * np.exp(-L)
    else:
        second = (np.exp(-L) - a) / (alpha - 1)
    return np.log(a + first - second)


def _breakpoints(t_max: float, n_per_decade: int = 4):
    if t_max <= 1:
        return np.array([0.0, t_max])
    inner = np.geomspace(1e-3, t_max, max(2, int(n_per_decade * math.log10(t_max / 1e-3)) + 1))
    return np.concatenate(([0.0], inner[inner < t_max], [t_max]))


def cumulative_quad(func: Callable[[float], float], t_grid) -> np.ndarray:
    """Integral of func over [0, t] for every t in an increasing grid, by piecewise adaptive quadrature."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be nonnegative and increasing")
    pts = np.unique(np.concatenate((_breakpoints(float(t_grid[-1])), t_grid)))
    acc = np.zeros_like(pts)
    for i in range(1, len(pts)):
        val, err = quad(func, pts[i - 1], pts[i], epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        if not math.isfinite(val):
            raise FloatingPointError(f"quadrature failed on [{pts[i - 1]}, {pts[i]}]")
        acc[i] = acc[i - 1] + val
    return acc[np.searchsorted(pts, t_grid)]


@dataclass(frozen=True)
class LemmaTable:
    name: str
    parameters: tuple
    t_grid: tuple
    constants: tuple  # minimal (or maximal feasible) constant per parameter
    oracle_error: float  # worst relative error of quadrature against the closed form
    passed: bool
    extra: dict = field(default_factory=dict)

    def csv(self) -> str:
        lines = ["parameter,constant"]
        lines += [f"{p:.17g},{c:.17g}" for p, c in zip(self.parameters, self.constants)]
        return "\n".join(lines) + "\n"


def lemmapaolo_check(alphas=(0.5, 1, 2, 10, 100), alpha0: float = 0.5, t_grid=None) -> LemmaTable:
    """Minimal c with (1+t)^alpha <= c alpha^2 (1 + int_0^t (1+s)^(alpha-2) s ds) on the grid.

    The closed form of the integral is checked against adaptive quadrature
    on the grid points where the integrand stays representable.
    """
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    alphas = tuple(float(a) for a in alphas)
    if min(alphas) < alpha0:
        raise ValueError("every alpha must be >= alpha0")
    t = np.asarray(np.concatenate(([0.0], np.geomspace(1e-3, 1e6, 91))) if t_grid is None else t_grid, float)
    consts, worst = [], 0.0
    for a in alphas:
        log_ratio = -2 * math.log(a) - _log_one_plus_moment_over_power(a, t)
        consts.append(float(np.exp(np.max(log_ratio))))
        tq = t[(a - 1) * np.log1p(t) < 600]
        numeric = cumulative_quad(lambda s, a=a: (1 + s) ** (a - 2) * s, tq)
        exact = power_moment(a, tq)
        nz = exact > 0
        if nz.any():
            worst = max(worst, float(np.max(np.abs(numeric[nz] - exact[nz]) / exact[nz])))
    passed = all(math.isfinite(c) for c in consts) and worst <= 1e-8
    return LemmaTable("lemmapaolo", alphas, tuple(t.tolist()), tuple(consts), worst, passed,
                      {"sup_c": max(consts), "alpha0": alpha0})


def g1g2_integral_check(g1: Callable, g2: Callable, beta: float, two_star: float, gammas=(0, 2, 8, 32),
                        t_grid=None, oracle: bool = False) -> LemmaTable:
    """Largest C3 with C3 [1 + g2(1+t)^(1/2*) (1+t)^(g/2+1-b) / (g/2+1-b)^2] <= 1 + J(t) on the grid.

    ``J(t)`` is the integral of (1+s)^((g-2)/2) s sqrt(g1(1+s)) over [0, t].
    With ``oracle=True`` the caller asserts g1 == 1, and J is compared with
    its closed form.
    """
    t = np.asarray(np.concatenate(([0.0], np.geomspace(1e-3, 1e3, 61))) if t_grid is None else t_grid, float)
    consts, worst = [], 0.0
    for gam in gammas:
        e = gam / 2 + 1 - beta
        if e <= 0:
            raise ValueError(f"gamma={gam} gives a nonpositive exponent")
        J = cumulative_quad(lambda s, gam=gam: (1 + s) ** ((gam - 2) / 2) * s * math.sqrt(g1(1 + s)), t)
        if oracle:
            exact = power_moment(gam / 2 + 1, t)
            nz = exact > 0
            if nz.any():
                worst = max(worst, float(np.max(np.abs(J[nz] - exact[nz]) / exact[nz])))
        g2v = np.array([g2(1 + s) for s in t])
        left = 1 + g2v ** (1 / two_star) * (1 + t) ** e / e**2
        consts.append(float(np.min((1 + J) / left)))
    passed = all(c > 0 and math.isfinite(c) for c in consts) and worst <= 1e-8
    return LemmaTable("g1g2", tuple(float(g) for g in gammas), tuple(t.tolist()), tuple(consts), worst, passed,
                      {"inf_C3": min(consts), "beta": beta, "two_star": two_star})


def growth_callables(samples: GrowthBoundSamples):
    """Log-log interpolants of sampled g1, g2, held constant outside the sampled range."""
    lt = np.log(samples.t_grid)
    l1, l2 = np.log(samples.g1), np.log(samples.g2)

    def g1(t):
        return float(np.exp(np.interp(math.log(t), lt, l1)))

    def g2(t):
        return float(np.exp(np.interp(math.log(t), lt, l2)))

    return g1, g2


# ---------------------------------------------------------------------------
# Step-one inequality


def step1_inequality_probe(u: GridFunction, g2: Callable, beta: float, rho: float = DEFAULT_RADII[0],
                           R: float = DEFAULT_RADII[1], n: int = 2, center=CENTER) -> dict:
    """Minimal c4 with (sup_{B_rho} T)^(2 - n beta) <= c4 (R - rho)^-n int_{B_R} T^2 g2(T), T = 1 + (|Du| - 1)_+."""
    X, Y = cell_centers(u.N)
    d2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    g = np.linalg.norm(kernels.cell_gradients(np.ascontiguousarray(u.values), u.h), axis=-1)
    T = 1 + np.maximum(g - 1, 0)
    inner, outer = d2 <= rho * rho, d2 <= R * R
    if not inner.any():
        raise ValueError(f"no cell centre inside B_{rho}")
    lhs = float(T[inner].max()) ** (2 - n * beta)
    Tv = T[outer].ravel()
    g2v = np.array([g2(x) for x in Tv])
    rhs = float(np.sum(Tv**2 * g2v)) / (4 * u.N**2) / (R - rho) ** n
    return {"lhs": lhs, "integral": rhs, "c4": lhs / rhs}


def plus_one_slack(g2: Callable, t) -> np.ndarray:
    """(1/g2(1) + 1) t^2 g2(t) - (1 + t^2 g2(t)); nonnegative where t^2 g2(t) >= g2(1)."""
    t = np.asarray(t, dtype=float)
    g1v = g2(1.0)
    tg = t**2 * np.array([g2(x) for x in t])
    return (1 / g1v + 1) * tg - (1 + tg)
