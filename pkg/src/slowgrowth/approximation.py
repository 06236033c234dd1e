"""Smooth approximations of an energy density and mollification of grid functions.

``build_fk`` replaces f inside a ball by a mollified copy::

    f_k = f (1 - phi) + (f phi) * eta_{1/k},

with a smooth radial cutoff phi equal to 1 on ``|xi| <= t0 + 1`` and to 0
on ``|xi| >= t0 + 1.5``. For ``k >= 2`` the mollified term then vanishes
identically on ``|xi| >= t0 + 2``, where f_k is returned as f itself.
``build_ftilde_k`` adds the uniformly convex perturbation
``(1/k) h(|xi|/(t0 + 2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gamma

from . import kernels
from .ellipticity import sample_growth_bounds, sphere_directions
from .grid import GridFunction
from .integrands import EnergyDensity, ParameterError

QUAD_TOL = 1e-8
QUAD_START = 8
QUAD_MAX = 256
CUTOFF_WIDTH = 0.5


# ---------------------------------------------------------------------------
# Profiles


def perturbation_h(t):
    """C^2 convex profile: (6t^2 - t^4 + 3)/8 on [0, 1) and t on [1, inf).

    Returns ``(h, h', h'')``.

    >>> [float(v) for v in perturbation_h(1.0)]
    [1.0, 1.0, 0.0]
    """
    t = np.asarray(t, dtype=float)
    inner = t < 1
    h = np.where(inner, (6 * t**2 - t**4 + 3) / 8, t)
    dh = np.where(inner, (3 * t - t**3) / 2, 1.0)
    d2h = np.where(inner, (3 - 3 * t**2) / 2, 0.0)
    return h, dh, d2h


def _bump(r2):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1, np.exp(-1.0 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)


def bump_mass(d: int) -> float:
    """Integral of exp(-1/(1-|y|^2)) over the unit ball of R^d."""
    sphere = 2 * math.pi ** (d / 2) / gamma(d / 2)
    val, _ = quad(lambda r: math.exp(-1 / (1 - r * r)) * r ** (d - 1), 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    return sphere * val


class Mollifier:
    """Normalized bump eta on the unit ball of R^d, with gradient and Hessian."""

    def __init__(self, d: int):
        self.d = d
        self.mass = bump_mass(d)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return _bump(np.sum(z * z, axis=-1)) / self.mass

    def scaled(self, y, eps):
        """eta_eps(y) = eps^-d eta(y / eps)."""
        return self(np.asarray(y) / eps) / eps**self.d

    def derivatives(self, z):
        """(eta, grad eta, hess eta) at points z of shape (m, d)."""
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        inside = r2 < 1
        s = np.where(inside, 1 - r2, 1.0)
        e = _bump(r2) / self.mass
        # eta = exp(-1/s), s = 1 - |z|^2: grad = -2 z eta / s^2
        c1 = np.where(inside, -2.0 / s**2, 0.0)
        grad = (c1 * e)[:, None] * z
        # hess = eta [c1 I + (4/s^4 - 8/s^3) z z^T]
        c2 = np.where(inside, 4.0 / s**4 - 8.0 / s**3, 0.0)
        eye = np.eye(z.shape[-1])
        hess = e[:, None, None] * (c1[:, None, None] * eye + c2[:, None, None] * z[:, :, None] * z[:, None, :])
        return e, grad, hess


def _psi(s):
    """Smooth step 0 -> 1 on [0, 1] with first and second derivatives."""
    s = np.asarray(s, dtype=float)
    a_in = (s > 0) & (s < 1)
    sa = np.where(a_in, s, 0.5)
    A = np.exp(-1 / sa)
    B = np.exp(-1 / (1 - sa))
    dA = A / sa**2
    dB = -B / (1 - sa) ** 2
    d2A = A * (1 - 2 * sa) / sa**4
    d2B = B * (1 - 2 * (1 - sa)) / (1 - sa) ** 4
    D = A + B
    Nn = dA * B - A * dB
    val = A / D
    d1 = Nn / D**2
    d2 = (d2A * B - A * d2B) / D**2 - 2 * Nn * (dA + dB) / D**3
    val = np.where(s >= 1, 1.0, np.where(s <= 0, 0.0, val))
    d1 = np.where(a_in, d1, 0.0)
    d2 = np.where(a_in, d2, 0.0)
    return val, d1, d2


def cutoff(t, t0: float, width: float = CUTOFF_WIDTH):
    """Radial cutoff phi(t): 1 for t <= t0 + 1, 0 for t >= t0 + 1 + width; returns (phi, phi', phi'')."""
    s = (t0 + 1 + width - np.asarray(t, dtype=float)) / width
    v, d1, d2 = _psi(s)
    return v, -d1 / width, d2 / width**2


def _radial_derivs(xi, g, dg, d2g, t):
    """Gradient and Hessian of xi -> G(|xi|) given G, G', G'' at t = |xi| (t > 0 where dg != 0)."""
    n = xi.shape[-1]
    safe = np.where(t > 0, t, 1.0)
    e = xi / safe[..., None]
    ee = e[..., :, None] * e[..., None, :]
    gt = np.where(t > 0, dg / safe, d2g)
    grad = dg[..., None] * e
    hess = d2g[..., None, None] * ee + gt[..., None, None] * (np.eye(n) - ee)
    return grad, hess


# ---------------------------------------------------------------------------
# Smoothed densities


class FkDensity(EnergyDensity):
    """f_k = f (1 - phi) + (f phi) * eta_{1/k}, evaluated by tensor Gauss-Legendre quadrature."""

    name = "fk"

    def __init__(self, base: EnergyDensity, k: int, t0: float | None = None, n: int | None = None):
        if int(k) != k or k < 2:
            raise ParameterError(f"k must be an integer >= 2 so the mollified term stays inside B_(t0+2), got {k}")
        t0 = base.t0 if t0 is None else float(t0)
        n = base.dim(n if n is not None else (None if base.n is not None else 2))
        super().__init__({"k": float(k), "t0": t0}, t0=t0, n=n)
        self.base, self.k = base, int(k)
        self.eta = Mollifier(n)
        self.quad_nodes = None
        self._cache = {}
        self.name = f"fk[{base.spec_string}]"

    def _rule(self, m):
        if m not in self._cache:
            x, w = leggauss(m)
            grids = np.meshgrid(*([x] * self.n), indexing="ij")
            z = np.stack([g.ravel() for g in grids], axis=-1)
            wt = np.ones(z.shape[0])
            for ax in np.meshgrid(*([w] * self.n), indexing="ij"):
                wt = wt * ax.ravel()
            e, de, d2e = self.eta.derivatives(z)
            keep = e > 0
            self._cache[m] = (z[keep], wt[keep] * e[keep], wt[keep, None] * de[keep],
                              wt[keep, None, None] * d2e[keep])
        return self._cache[m]

    def _fphi(self, y):
        t = np.linalg.norm(y, axis=-1)
        return self.base.eval(y) * cutoff(t, self.t0)[0]

    def _conv(self, xi, m, order=0):
        z, we, wde, wd2e = self._rule(m)
        out_v = np.empty(xi.shape[0])
        out_g = np.empty(xi.shape) if order >= 1 else None
        out_h = np.empty(xi.shape + (self.n,)) if order >= 2 else None
        chunk = max(1, 2_000_000 // max(z.shape[0], 1))
        for s in range(0, xi.shape[0], chunk):
            pts = xi[s:s + chunk, None, :] - z[None, :, :] / self.k
            F = self._fphi(pts)
            out_v[s:s + chunk] = F @ we
            if order >= 1:
                out_g[s:s + chunk] = self.k * np.einsum("pq,qi->pi", F, wde)
            if order >= 2:
                out_h[s:s + chunk] = self.k**2 * np.einsum("pq,qij->pij", F, wd2e)
        return out_v, out_g, out_h

    def _converged_conv(self, xi, order):
        m = QUAD_START
        prev = self._conv(xi, m, 0)[0]
        while True:
            m2 = 2 * m
            cur = self._conv(xi, m2, 0)[0]
            change = np.abs(cur - prev)
            if not np.all(np.isfinite(cur)):
                raise FloatingPointError("non-finite values in the mollified term")
            # relative to the batch scale: the convolution vanishes where f does
            if np.all(change <= QUAD_TOL * max(np.abs(cur).max(), 1e-300)) or m2 >= QUAD_MAX:
                self.quad_nodes = m2
                if order == 0:
                    return cur, None, None
                return self._conv(xi, m2, order)
            m, prev = m2, cur

    def _split(self, xi):
        xi = np.asarray(xi, dtype=float)
        shape = xi.shape[:-1]
        flat = xi.reshape(-1, self.n)
        t = np.linalg.norm(flat, axis=-1)
        near = t < self.t0 + 2
        return shape, flat, t, near

    def eval(self, xi):
        shape, flat, t, near = self._split(xi)
        out = np.array(self.base.eval(flat), dtype=float)
        if near.any():
            x = flat[near]
            phi = cutoff(t[near], self.t0)[0]
            conv = self._converged_conv(x, 0)[0]
            out[near] = self.base.eval(x) * (1 - phi) + conv
        return out.reshape(shape)

    def grad(self, xi):
        shape, flat, t, near = self._split(xi)
        out = np.array(self.base.grad(flat), dtype=float)
        if near.any():
            x, tn = flat[near], t[near]
            phi, dphi, d2phi = cutoff(tn, self.t0)
            gphi, _ = _radial_derivs(x, phi, dphi, d2phi, tn)
            fv = self.base.eval(x)
            _, cg, _ = self._converged_conv(x, 1)
            out[near] = self.base.grad(x) * (1 - phi)[:, None] - fv[:, None] * gphi + cg
        return out.reshape(shape + (self.n,))

    def hess(self, xi):
        shape, flat, t, near = self._split(xi)
        out = np.array(self.base.hess(flat), dtype=float)
        if near.any():
            x, tn = flat[near], t[near]
            phi, dphi, d2phi = cutoff(tn, self.t0)
            gphi, hphi = _radial_derivs(x, phi, dphi, d2phi, tn)
            fv = self.base.eval(x)
            gf = self.base.grad(x)
            # D^2 f only matters where phi < 1, i.e. outside B_(t0+1)
            outer = gf[:, :, None] * gphi[:, None, :]
            ring = phi < 1
            Hf = np.zeros(x.shape + (self.n,))
            if ring.any():
                Hf[ring] = self.base.hess(x[ring])
            _, _, ch = self._converged_conv(x, 2)
            out[near] = (Hf * (1 - phi)[:, None, None] - outer - np.swapaxes(outer, 1, 2)
                         - fv[:, None, None] * hphi + ch)
        return out.reshape(shape + (self.n, self.n))


class PerturbedDensity(EnergyDensity):
    """g + (1/k) h(|xi| / c) with the C^2 profile h."""

    def __init__(self, inner: EnergyDensity, k: int, c: float):
        super().__init__({"k": float(k), "c": float(c)}, t0=inner.t0, n=inner.n)
        self.inner, self.k, self.c = inner, k, float(c)
        self.name = f"ftilde[{inner.spec_string}]"

    def _h(self, xi):
        t = np.linalg.norm(xi, axis=-1)
        h, dh, d2h = perturbation_h(t / self.c)
        return t, h / self.k, dh / (self.k * self.c), d2h / (self.k * self.c**2)

    def eval(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.inner.eval(xi) + self._h(xi)[1]

    def grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        t, h, dh, d2h = self._h(xi)
        return self.inner.grad(xi) + _radial_derivs(xi, h, dh, d2h, t)[0]

    def hess(self, xi):
        xi = np.asarray(xi, dtype=float)
        t, h, dh, d2h = self._h(xi)
        return self.inner.hess(xi) + _radial_derivs(xi, h, dh, d2h, t)[1]


def build_fk(base: EnergyDensity, k: int, t0: float | None = None, n: int | None = None) -> FkDensity:
    return FkDensity(base, k, t0, n)


def build_ftilde_k(fk: EnergyDensity, k: int, t0: float | None = None) -> PerturbedDensity:
    t0 = fk.t0 if t0 is None else float(t0)
    return PerturbedDensity(fk, k, t0 + 2)


# ---------------------------------------------------------------------------
# Sweeps


def sample_ball(n: int, count: int, radius: float, seed: int = 0):
    """Deterministic points uniformly distributed in the ball B_radius of R^n."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return z * r[:, None]


@dataclass(frozen=True)
class KSweep:
    ks: tuple
    sup_diff: tuple
    min_eig: tuple
    k_star_gap: int | None
    k_star_convex: int | None
    quad_nodes: tuple

    @property
    def k_star(self) -> int | None:
        if self.k_star_gap is None or self.k_star_convex is None:
            return None
        return max(self.k_star_gap, self.k_star_convex)


def _first_stable(ks, ok):
    for i in range(len(ks)):
        if all(ok[i:]):
            return ks[i]
    return None


def k_sweep(base: EnergyDensity, ks=(2, 4, 8, 16, 32), t0: float | None = None, n: int | None = None,
            count: int = 200, seed: int = 0, convex_tol: float = 1e-9) -> KSweep:
    """sup |f - f_k| and the smallest Hessian eigenvalue of f_k on points of B_(t0+2).

    ``k_star_gap`` is the smallest k in the sweep from which every larger k
    has sup |f - f_k| <= 1; ``k_star_convex`` the same for a positive
    semidefinite sampled Hessian.
    """
    t0 = base.t0 if t0 is None else float(t0)
    n = base.dim(n if n is not None else (None if base.n is not None else 2))
    pts = sample_ball(n, count, t0 + 2, seed)
    diffs, eigs, nodes = [], [], []
    for k in ks:
        fk = build_fk(base, k, t0, n)
        diffs.append(float(np.max(np.abs(fk.eval(pts) - base.eval(pts)))))
        nodes.append(fk.quad_nodes)
        ev = np.linalg.eigvalsh(fk.hess(pts))
        eigs.append(float(ev[:, 0].min()))
    gap = _first_stable(ks, [d <= 1 for d in diffs])
    cvx = _first_stable(ks, [e >= -convex_tol for e in eigs])
    return KSweep(tuple(ks), tuple(diffs), tuple(eigs), gap, cvx, tuple(nodes))


def ftilde_upper_bound_check(base: EnergyDensity, k: int, t0: float | None = None, n: int | None = None,
                             t_max: float = 1e3, n_t: int = 60, n_dirs: int = 128, seed: int = 0):
    """Check sup Q_ftilde / |lam|^2 <= 2 g2(|xi|) on |xi| >= t0 + 2 for k past the threshold.

    The threshold is ``1 / ((t0+2)^2 g2(t0+2))``. Returns a dict with the
    threshold, the worst ratio and a pass flag.
    """
    t0 = base.t0 if t0 is None else float(t0)
    n = base.dim(n if n is not None else (None if base.n is not None else 2))
    c = t0 + 2
    t = np.geomspace(c, t_max, n_t)
    s = sample_growth_bounds(base, t, n_dirs, seed, n)
    threshold = float(1.0 / (c * c * s.g2[0]))
    ft = PerturbedDensity(base, k, c)  # f_k = f on |xi| >= t0 + 2
    dirs = sphere_directions(n, n_dirs, seed)
    xi = t[:, None, None] * dirs[None]
    top = np.linalg.eigvalsh(ft.hess(xi))[..., -1].max(axis=1)
    ratio = float(np.max(top / s.g2))
    return {"k": k, "threshold": threshold, "applies": bool(k >= threshold), "worst_ratio": ratio,
            "passed": bool(k < threshold or ratio <= 2 * (1 + 1e-12))}


# ---------------------------------------------------------------------------
# Grid mollification


def grid_kernel(eps: float, h: float, d: int = 2) -> np.ndarray:
    """Bump weights on the grid offsets within distance eps, normalized to unit sum."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = int(math.floor(eps / h + 1e-12))
    off = np.arange(-m, m + 1) * h
    Y1, Y2 = np.meshgrid(off, off, indexing="ij")
    w = _bump((Y1**2 + Y2**2) / eps**2)
    s = w.sum()
    if s == 0:
        w = np.zeros_like(w)
        w[m, m] = 1.0
        return w
    return w / s


def mollify_grid(u: GridFunction, eps: float) -> GridFunction:
    """Discrete convolution u_eps = u * eta_eps on nodes at distance >= eps from the boundary.

    The returned grid keeps the original values elsewhere; ``valid`` marks
    the nodes where the convolution is defined.
    """
    K = grid_kernel(eps, u.h)
    m = (K.shape[0] - 1) // 2
    if 2 * m >= u.N:
        raise ValueError(f"eps={eps} leaves no interior nodes on an N={u.N} grid")
    out = np.array(u.values)
    valid = np.zeros_like(out, dtype=bool)
    if m == 0:
        valid[:] = True
        return GridFunction(out, valid)
    out[m:u.N + 1 - m, m:u.N + 1 - m] = kernels.correlate_valid(np.ascontiguousarray(u.values), K)
    valid[m:u.N + 1 - m, m:u.N + 1 - m] = True
    return GridFunction(out, valid)


@dataclass(frozen=True)
class EnergyTable:
    rho: float
    rows: tuple  # (eps, energy_eps_rho, energy_rho, gap, bound_rho_plus_eps)
    dominance_ok: bool
    worst_excess: float

    def csv(self) -> str:
        lines = ["eps,energy,gap,bound"]
        for eps, e_eps, _, gap, bound in self.rows:
            lines.append(f"{eps:.17g},{e_eps:.17g},{gap:.17g},{bound:.17g}")
        return "\n".join(lines) + "\n"


def ball_energy(f: EnergyDensity, u: GridFunction, radius: float, center=(0.5, 0.5)) -> float:
    """Quadrature of f(Du) over the cells whose centre lies in B_radius."""
    from .grid import cell_centers

    X, Y = cell_centers(u.N)
    mask = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius * radius
    g = kernels.cell_gradients(np.ascontiguousarray(u.values), u.h)
    return float(np.sum(f.eval(g[mask]))) * u.h * u.h / 4.0


def energy_convergence_check(f: EnergyDensity, u: GridFunction, rho: float, eps_list,
                             center=(0.5, 0.5), tol: float = 1e-10) -> EnergyTable:
    """Compare the energy of u_eps on B_rho with that of u on B_rho and B_(rho+eps).

    Convexity of f and nonnegativity of the weights give, cell by cell, the
    dominance ``E(u_eps; B_rho) <= E(u; B_(rho+eps))``; it is checked with a
    relative tolerance ``tol``.
    """
    from .grid import cell_centers

    X, Y = cell_centers(u.N)
    inner = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= rho * rho
    e_rho = ball_energy(f, u, rho, center)
    rows, ok, worst = [], True, -np.inf
    for eps in eps_list:
        ue = mollify_grid(u, eps)
        v = ue.valid
        cell_ok = v[:-1, :-1] & v[1:, :-1] & v[:-1, 1:] & v[1:, 1:]
        if not np.all(cell_ok[inner]):
            raise ValueError(f"B_rho + eps with eps={eps} does not fit inside the valid region")
        e_eps = ball_energy(f, ue, rho, center)
        bound = ball_energy(f, u, rho + eps, center)
        excess = (e_eps - bound) / max(abs(bound), 1e-300)
        worst = max(worst, excess)
        ok &= excess <= tol
        rows.append((float(eps), e_eps, e_rho, abs(e_eps - e_rho), bound))
    return EnergyTable(rho, tuple(rows), bool(ok), float(worst))
