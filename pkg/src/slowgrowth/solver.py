"""Q1 finite-element minimization of integral functionals on the unit square.

The energy ``E(u) = sum_cells sum_q w f(Du(x_q))`` uses bilinear elements and
2x2 Gauss quadrature. Minimization is a damped Newton method with a sparse
Hessian and Armijo backtracking, so the energy never increases between
accepted iterates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from . import kernels
from .grid import GridFunction, boundary_mask, cell_centers, quadrature_points
from .integrands import EnergyDensity

DEFAULT_RADII = (0.15, 0.35)
CENTER = (0.5, 0.5)


class ConvergenceError(RuntimeError):
    """Minimizer stopped without meeting the residual tolerance."""

    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass(frozen=True)
class DirichletProblem:
    """Minimize the integral of f(Du) over [0,1]^2 with u fixed on the boundary.

    ``data`` holds the prescribed values on every fixed node (the boundary
    ring plus the optional ``fixed`` mask); values elsewhere are ignored.
    """

    f: EnergyDensity
    data: GridFunction
    fixed: np.ndarray

    @property
    def N(self) -> int:
        return self.data.N

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed


def discretize(f: EnergyDensity, boundary, N: int | None = None, fixed=None) -> DirichletProblem:
    """Build a Dirichlet problem from boundary data.

    ``boundary`` is either a GridFunction or a callable ``g(x, y)``; in the
    latter case ``N`` is required.
    """
    if f.n not in (None, 2):
        raise ValueError(f"the solver works in 2-D; {f.spec_string} lives in R^{f.n}")
    if isinstance(boundary, GridFunction):
        data = boundary
        if N is not None and N != data.N:
            raise ValueError("N does not match the boundary grid")
    else:
        if N is None or N < 2:
            raise ValueError("N >= 2 required")
        data = GridFunction.from_function(boundary, N)
    mask = boundary_mask(data.N)
    if fixed is not None:
        fixed = np.asarray(fixed, dtype=bool)
        if fixed.shape != mask.shape:
            raise ValueError("fixed mask shape mismatch")
        mask = mask | fixed
    if mask.all():
        raise ValueError("no free nodes")
    return DirichletProblem(f, data, mask)


class _Assembler:
    def __init__(self, N: int):
        self.N = N
        self.h = 1.0 / N
        i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        nodes = np.stack([i * (N + 1) + j, (i + 1) * (N + 1) + j, i * (N + 1) + j + 1,
                          (i + 1) * (N + 1) + j + 1], axis=-1)
        self.rows = np.broadcast_to(nodes[..., :, None], (N, N, 4, 4)).ravel()
        self.cols = np.broadcast_to(nodes[..., None, :], (N, N, 4, 4)).ravel()

    def grads(self, u):
        return kernels.cell_gradients(np.ascontiguousarray(u, dtype=float), self.h)

    def energy(self, f, u):
        return float(np.sum(f.eval(self.grads(u)))) * self.h * self.h / 4.0

    def energy_grad(self, f, u):
        g = self.grads(u)
        E = float(np.sum(f.eval(g))) * self.h * self.h / 4.0
        flux = np.ascontiguousarray(f.grad(g), dtype=float)
        return E, kernels.scatter_flux(flux, self.h), g

    def hessian(self, f, g):
        hq = np.ascontiguousarray(f.hess(g), dtype=float)
        K = kernels.cell_stiffness(hq, self.h)
        n = (self.N + 1) ** 2
        return sp.csr_matrix((K.ravel(), (self.rows, self.cols)), shape=(n, n))


def coons_patch(values: np.ndarray) -> np.ndarray:
    """Transfinite bilinear interpolation of the boundary ring."""
    v = np.asarray(values, dtype=float)
    N = v.shape[0] - 1
    s = np.linspace(0.0, 1.0, N + 1)
    X, Y = np.meshgrid(s, s, indexing="ij")
    left, right = v[0, :][None, :], v[-1, :][None, :]
    bottom, top = v[:, 0][:, None], v[:, -1][:, None]
    out = ((1 - X) * left + X * right + (1 - Y) * bottom + Y * top
           - ((1 - X) * (1 - Y) * v[0, 0] + X * (1 - Y) * v[-1, 0] + (1 - X) * Y * v[0, -1] + X * Y * v[-1, -1]))
    return out


@dataclass
class SolveResult:
    u: GridFunction
    energy: float
    iterations: int
    residual: float
    converged: bool
    energy_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    sup_grad: dict = field(default_factory=dict)
    local_mean: dict = field(default_factory=dict)


def energy(problem: DirichletProblem, u) -> float:
    vals = u.values if isinstance(u, GridFunction) else u
    return _Assembler(problem.N).energy(problem.f, vals)


def minimize(problem: DirichletProblem, tol: float = 1e-8, max_iter: int = 100_000, init=None,
             radii=DEFAULT_RADII) -> SolveResult:
    """Damped Newton iteration until sup |dE/du_free| <= tol (1 + |E|)."""
    f = problem.f
    asm = _Assembler(problem.N)
    free = problem.free.ravel()
    fixed_vals = problem.data.values
    if init is None:
        u = coons_patch(fixed_vals)
    else:
        u = np.array(init.values if isinstance(init, GridFunction) else init, dtype=float)
    u[problem.fixed] = fixed_vals[problem.fixed]

    E, G, g = asm.energy_grad(f, u)
    e_hist, r_hist = [E], []
    it = 0
    converged = False
    while True:
        gf = G.ravel()[free]
        res = float(np.max(np.abs(gf)))
        r_hist.append(res)
        if not math.isfinite(res) or not math.isfinite(E):
            raise ConvergenceError("non-finite energy or gradient", r_hist)
        if res <= tol * (1 + abs(E)):
            converged = True
            break
        if it >= max_iter:
            break
        K = asm.hessian(f, g)[free][:, free].tocsc()
        d = _newton_direction(K, gf)
        slope = float(gf @ d)
        step, accepted = 1.0, False
        while step > 1e-14:
            trial = u.copy()
            trial.ravel()[free] += step * d
            Et = asm.energy(f, trial)
            if math.isfinite(Et) and Et <= E + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if abs(slope) <= 1e-13 * (1 + abs(E)):
                # at rounding level: no representable decrease is left
                converged = res <= 1e3 * tol * (1 + abs(E))
                break
            raise ConvergenceError(f"line search failed at iteration {it}, residual {res:.3e}", r_hist)
        u = trial
        E, G, g = asm.energy_grad(f, u)
        e_hist.append(E)
        it += 1
    if not converged:
        raise ConvergenceError(f"no convergence after {it} iterations, residual {r_hist[-1]:.3e}", r_hist)
    ug = GridFunction(u)
    rho, R = radii
    return SolveResult(ug, E, it, r_hist[-1], converged, e_hist, r_hist,
                       {rho: interior_sup_gradient(ug, rho)}, {(rho, R): local_energy_mean(ug, f, rho, R)})


def _newton_direction(K, gf):
    diag = np.abs(K.diagonal())
    scale = float(np.max(diag)) if diag.size else 1.0
    shift = 0.0
    for _ in range(6):
        try:
            A = K if shift == 0 else K + shift * sp.identity(K.shape[0], format="csc")
            d = -spsolve(A, gf)
            if np.all(np.isfinite(d)) and gf @ d < 0:
                return d
        except RuntimeError:
            pass
        shift = 1e-10 * scale if shift == 0 else shift * 100
    safe = np.where(diag > 0, diag, scale if scale > 0 else 1.0)
    return -gf / safe


def _cells_in_ball(N, rho, center=CENTER):
    X, Y = cell_centers(N)
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= rho * rho


def interior_sup_gradient(u: GridFunction, rho: float, center=CENTER) -> float:
    """max |Du| over the Gauss points of cells whose centre lies in B_rho."""
    mask = _cells_in_ball(u.N, rho, center)
    if not mask.any():
        raise ValueError(f"no cell centre inside B_{rho}; refine the grid")
    g = kernels.cell_gradients(np.ascontiguousarray(u.values), u.h)
    return float(np.max(np.linalg.norm(g[mask], axis=-1)))


def local_energy_mean(u: GridFunction, f: EnergyDensity, rho: float, R: float, center=CENTER) -> float:
    """(R - rho)^(-2) times the integral of 1 + f(Du) over B_R."""
    if not 0 < rho < R:
        raise ValueError("need 0 < rho < R")
    mask = _cells_in_ball(u.N, R, center)
    if not mask.any():
        raise ValueError(f"no cell centre inside B_{R}; refine the grid")
    g = kernels.cell_gradients(np.ascontiguousarray(u.values), u.h)
    vals = 1.0 + f.eval(g[mask])
    return float(np.sum(vals)) * u.h * u.h / 4.0 / (R - rho) ** 2


def ball_area(N: int, R: float, center=CENTER) -> float:
    """Area of the union of cells whose centre lies in B_R."""
    return float(np.count_nonzero(_cells_in_ball(N, R, center))) / N**2


# ---------------------------------------------------------------------------
# Radial reference solution


class RadialOracle:
    """Radial minimizer of the integral of g(|Du|) on an annulus, from the first integral.

    For radial u the Euler equation reduces to ``r g'(u'(r)) = c``; the flux
    constant c is found by shooting so that u(r_in) = u_in and u(r_out) = u_out.
    """

    def __init__(self, dg: Callable, r_in: float, r_out: float, u_in: float, u_out: float,
                 r_span=(0.02, 0.75)):
        if not 0 < r_in < r_out:
            raise ValueError("need 0 < r_in < r_out")
        if u_out <= u_in:
            raise ValueError("expects u_out > u_in")
        self.dg = dg
        self.r_in, self.r_out, self.u_in, self.u_out = r_in, r_out, u_in, u_out

        def jump(c):
            sol = solve_ivp(lambda r, y: [self._slope(c, r)], (r_in, r_out), [0.0], rtol=1e-12, atol=1e-14)
            return sol.y[0, -1] - (u_out - u_in)

        hi = 1.0
        while jump(hi) < 0:
            hi *= 2
        self.c = brentq(jump, 0.0 + 1e-300, hi, xtol=1e-15, rtol=1e-14)
        lo_r, hi_r = r_span
        up = solve_ivp(lambda r, y: [self._slope(self.c, r)], (r_in, hi_r), [u_in], rtol=1e-12,
                       atol=1e-14, dense_output=True)
        down = solve_ivp(lambda r, y: [self._slope(self.c, r)], (r_in, lo_r), [u_in], rtol=1e-12,
                         atol=1e-14, dense_output=True)
        self._up, self._down, self._lo = up.sol, down.sol, lo_r

    def _slope(self, c, r):
        target = c / r
        hi = 1.0
        while self.dg(hi) < target:
            hi *= 2
        return brentq(lambda s: self.dg(s) - target, 0.0, hi, xtol=1e-15, rtol=1e-15)

    def slope(self, r):
        """u'(r) for an array of radii."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        target = self.c / r
        return np.array([self._slope(self.c, ri) for ri in r])

    def value(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.maximum(r, self._lo).ravel()
        out = np.where(rc >= self.r_in, self._up(np.maximum(rc, self.r_in))[0],
                       self._down(np.minimum(rc, self.r_in))[0])
        return out.reshape(r.shape)


def annulus_problem(f: EnergyDensity, oracle: RadialOracle, N: int) -> DirichletProblem:
    """Square with the nodes of B_{r_in} fixed to the radial solution."""
    u = GridFunction.from_function(lambda x, y: oracle.value(np.hypot(x - CENTER[0], y - CENTER[1])), N)
    X, Y = u.coords()
    hole = np.hypot(X - CENTER[0], Y - CENTER[1]) <= oracle.r_in
    return discretize(f, u, fixed=hole)


def annulus_gradient_comparison(u: GridFunction, fixed: np.ndarray, oracle: RadialOracle, r_max: float):
    """Sup of |Du| over Gauss points of fully free cells with centre radius <= r_max.

    Returns ``(sup_discrete, sup_oracle)`` where the oracle's exact |u'| is
    taken at the same Gauss points.
    """
    N = u.N
    free_cell = ~(fixed[:-1, :-1] | fixed[1:, :-1] | fixed[:-1, 1:] | fixed[1:, 1:])
    mask = free_cell & _cells_in_ball(N, r_max)
    g = kernels.cell_gradients(np.ascontiguousarray(u.values), u.h)[mask]
    pts = quadrature_points(N)[mask]
    r = np.hypot(pts[..., 0] - CENTER[0], pts[..., 1] - CENTER[1])
    return float(np.max(np.linalg.norm(g, axis=-1))), float(np.max(oracle.slope(r.ravel())))
