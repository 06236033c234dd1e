"""Sampled ellipticity bounds and the structural hypotheses built on them.

The second variation of f is sampled on spheres ``|xi| = t`` to obtain
``g1(t) <= Q(xi, lam)/|lam|^2 <= g2(t)``. The monotonicity, balance, growth
and superlinearity conditions are then checked on a radius grid. Conditions
that only need to hold "for large t" are checked on the tail of the grid
that starts where the monotonicity condition begins to hold; that onset
radius is part of every report so the claim can be audited.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.stats import norm, qmc

from .integrands import EnergyDensity

SLACK = 1e-9
TWO_STAR_FACTOR = 1.25


class NonConvexityError(ValueError):
    """A sampled second variation was negative."""

    def __init__(self, msg, xi=None, lam=None, value=None):
        super().__init__(msg)
        self.xi, self.lam, self.value = xi, lam, value


@dataclass(frozen=True)
class Verdict:
    """Outcome of one condition check."""

    condition: str
    passed: bool
    margin: float = float("nan")
    constant: float | None = None
    witness: dict | None = None
    detail: str = ""

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Exponents


def sobolev_exponent(n: int, beta: float | None = None, factor: float = TWO_STAR_FACTOR):
    """2* = 2n/(n-2) for n > 2; for n = 2 a finite stand-in factor * 2/(1-beta)."""
    if n > 2:
        return 2.0 * n / (n - 2)
    if beta is None:
        raise ValueError("n = 2 needs beta to pick the Sobolev stand-in exponent")
    if factor <= 1:
        raise ValueError("the n = 2 stand-in needs factor > 1 so that 2/2* < 1 - beta")
    return factor * 2.0 / (1.0 - beta)


def balance_exponent(n: int, beta: float | None = None, two_star: float | None = None) -> float:
    """Power of g2 on the left of the balance condition: (n-2)/n, or 2/2* when n = 2."""
    if n > 2:
        return (n - 2) / n
    ts = two_star if two_star is not None else sobolev_exponent(n, beta)
    return 2.0 / ts


@dataclass(frozen=True)
class HypothesisParams:
    """Exponents (mu, beta, alpha) for dimension n, validated."""

    mu: float
    beta: float
    alpha: float
    n: int
    two_star: float | None = None

    def __post_init__(self):
        if self.n < 2 or int(self.n) != self.n:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not 1 / self.n < self.beta < 2 / self.n:
            raise ValueError(f"beta must lie in (1/n, 2/n) = ({1 / self.n:.6g}, {2 / self.n:.6g}), got {self.beta}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.n == 2 and self.two_star is not None and not 2 / self.two_star < 1 - self.beta:
            raise ValueError("for n = 2 the Sobolev stand-in must satisfy 2/2* < 1 - beta")

    @property
    def sobolev(self) -> float:
        return self.two_star if self.two_star is not None else sobolev_exponent(self.n, self.beta)


def theta_ab(mu, alpha, beta, n):
    """Raw exponent (2-mu) alpha / (2 - mu - alpha (n beta - mu)); no range checks.

    Vectorized; entries with a non-positive denominator give ``inf``.
    """
    mu, alpha, beta = (np.asarray(v, dtype=float) for v in (mu, alpha, beta))
    den = 2 - mu - alpha * (n * beta - mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        th = np.where(den > 0, (2 - mu) * alpha / den, np.inf)
    return th if th.ndim else float(th)


def check_ab(mu: float, alpha: float, beta: float, n: int):
    """Exponent condition 2 - mu - alpha (n beta - mu) > 0.

    Returns ``(verdict, theta)`` where theta is the power of the energy mean
    in the resulting L-infinity bound for ``1 + |Du|^2 g2``-type quantities.

    >>> v, th = check_ab(mu=0.0, alpha=1.0, beta=0.5, n=2)
    >>> v.passed, th
    (True, 2.0)
    """
    if n < 2 or not 0 <= mu <= 1 or not 1 / n <= beta <= 2 / n or alpha < 1:
        raise ValueError(f"exponents out of range: mu={mu}, beta={beta}, alpha={alpha}, n={n}")
    margin = 2 - mu - alpha * (n * beta - mu)
    theta = theta_ab(mu, alpha, beta, n)
    v = Verdict("AB_exponent", bool(margin > 0), float(margin), None,
                None if margin > 0 else {"mu": mu, "alpha": alpha, "beta": beta, "n": n},
                "2 - mu - alpha (n beta - mu) > 0")
    return v, theta


def interpolation_form(mu, alpha, beta, n):
    """The same condition in interpolation form: vartheta (1 - lambda) < 1.

    vartheta = (2 - mu)/(2 - n beta), lambda = 1/alpha. Returns (ok, vartheta, lambda).
    """
    vt = (2 - mu) / (2 - n * beta)
    lam = 1.0 / alpha
    return vt * (1 - lam) < 1, vt, lam


# ---------------------------------------------------------------------------
# Sampling


def sphere_directions(n: int, n_dirs: int = 256, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors plus the signed coordinate axes."""
    if n_dirs < 1:
        raise ValueError("n_dirs must be positive")
    if n == 2:
        rng = np.random.default_rng(seed)
        ang = (np.arange(n_dirs) + rng.random()) * (2 * np.pi / n_dirs)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        pts = qmc.Sobol(d=n, scramble=True, seed=seed).random(n_dirs)
        z = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        dirs = z / np.linalg.norm(z, axis=1, keepdims=True)
    eye = np.eye(n)
    return np.concatenate([dirs, eye, -eye])


@dataclass(frozen=True)
class GrowthBoundSamples:
    """Sampled extremes of the second variation and of f on spheres |xi| = t."""

    t_grid: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    fmin: np.ndarray
    fmax: np.ndarray
    n: int
    n_dirs: int
    seed: int
    spec: str = ""

    def restrict(self, start: int) -> "GrowthBoundSamples":
        return GrowthBoundSamples(self.t_grid[start:], self.g1[start:], self.g2[start:],
                                  self.fmin[start:], self.fmax[start:], self.n, self.n_dirs,
                                  self.seed, self.spec)


def sample_growth_bounds(f: EnergyDensity, t_grid, n_dirs: int = 256, seed: int = 0,
                         n: int | None = None, polish: bool = True) -> GrowthBoundSamples:
    """Sample min/max of Q(xi, lam)/|lam|^2 over |xi| = t for each grid radius.

    For every sampled xi the extremes over lam are taken exactly as the
    extreme eigenvalues of the Hessian, so only xi is sampled. With
    ``polish`` the best sampled direction on each sphere is refined by a
    local search, which removes the ripple a fixed direction set leaves in
    g1, g2 and min f as functions of t.
    """
    n = f.dim(n)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-D array")
    if t_grid[0] <= f.t0:
        raise ValueError(f"t_grid must start above t0={f.t0}")
    if n_dirs < 64:
        raise ValueError("n_dirs must be at least 64")
    dirs = sphere_directions(n, n_dirs, seed)
    xi = t_grid[:, None, None] * dirs[None, :, :]
    H = f.hess(xi)
    w, V = np.linalg.eigh(H)
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite second variation sampled")
    lo = w[..., 0]
    scale = np.maximum(np.abs(w[..., -1]), 1e-300)
    bad = lo < -1e-10 * scale
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise NonConvexityError(
            f"negative second variation {lo[i, j]:.3e} at |xi|={t_grid[i]:.6g}",
            xi=xi[i, j].tolist(), lam=V[i, j, :, 0].tolist(), value=float(lo[i, j]))
    fv = f.eval(xi)
    g1, g2 = lo.min(axis=1), w[..., -1].max(axis=1)
    fmin, fmax = fv.min(axis=1), fv.max(axis=1)
    if polish:
        spacing = 2 * np.pi / n_dirs
        for i, t in enumerate(t_grid):
            g1[i] = min(g1[i], _polish(f, t, dirs[np.argmin(lo[i])], n, spacing, "min_eig"))
            g2[i] = max(g2[i], -_polish(f, t, dirs[np.argmax(w[i, :, -1])], n, spacing, "max_eig"))
            fmin[i] = min(fmin[i], _polish(f, t, dirs[np.argmin(fv[i])], n, spacing, "min_f"))
    return GrowthBoundSamples(t_grid, g1, g2, fmin, fmax, n, n_dirs, seed, f.spec_string)


def _polish(f, t, d0, n, spacing, what):
    """Locally minimize an objective over the sphere |xi| = t starting at direction d0."""

    def obj_vec(d):
        xi = t * d / np.linalg.norm(d)
        if what == "min_f":
            return float(f.eval(xi))
        ev = np.linalg.eigvalsh(f.hess(xi))
        return float(ev[0]) if what == "min_eig" else -float(ev[-1])

    if n == 2:
        a0 = math.atan2(d0[1], d0[0])
        res = minimize_scalar(lambda a: obj_vec(np.array([math.cos(a), math.sin(a)])),
                              bounds=(a0 - spacing, a0 + spacing), method="bounded",
                              options={"xatol": 1e-10})
        return min(float(res.fun), obj_vec(d0))
    res = minimize(obj_vec, d0, method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 400 * n,
                            "initial_simplex": d0 + spacing * np.vstack([np.zeros(n), np.eye(n)])})
    return min(float(res.fun), obj_vec(d0))


# ---------------------------------------------------------------------------
# Individual conditions


def check_H1(samples: GrowthBoundSamples) -> Verdict:
    """Two-sided bound g1 |lam|^2 <= Q <= g2 |lam|^2 with 0 < g1 <= g2 finite."""
    g1, g2 = samples.g1, samples.g2
    ok = np.all(np.isfinite(g1)) and np.all(np.isfinite(g2)) and np.all(g1 > 0) and np.all(g1 <= g2)
    witness = None
    if not ok:
        i = int(np.argmin(g1))
        witness = {"t": float(samples.t_grid[i]), "g1": float(g1[i]), "g2": float(g2[i])}
    return Verdict("H1_ellipticity", bool(ok), float(np.min(g1 / g2)), None, witness,
                   "sampled g1 > 0 and g1 <= g2 on the grid")


def check_H2(samples: GrowthBoundSamples, mu: float, slack: float = SLACK) -> Verdict:
    """t^mu g2 non-increasing and t g2 non-decreasing along the grid."""
    t, g2 = samples.t_grid, samples.g2
    a = t**mu * g2
    b = t * g2
    up = a[1:] > a[:-1] * (1 + slack)
    down = b[1:] < b[:-1] * (1 - slack)
    bad = np.nonzero(up | down)[0]
    if bad.size:
        i = int(bad[0])
        which = "t^mu g2 increases" if up[i] else "t g2 decreases"
        return Verdict("H2_monotonicity", False, float("nan"), None,
                       {"t_pair": [float(t[i]), float(t[i + 1])], "violation": which}, which)
    margin = float(min(np.min(a[:-1] / a[1:]) - 1, np.min(b[1:] / b[:-1]) - 1))
    return Verdict("H2_monotonicity", True, margin, None, None, f"mu={mu}")


def h2_onset(samples: GrowthBoundSamples, mu: float, slack: float = SLACK) -> int:
    """Index from which the monotonicity condition holds up to the end of the grid."""
    t, g2 = samples.t_grid, samples.g2
    a = t**mu * g2
    b = t * g2
    bad = np.nonzero((a[1:] > a[:-1] * (1 + slack)) | (b[1:] < b[:-1] * (1 - slack)))[0]
    return int(bad[-1] + 1) if bad.size else 0


def _tail_bounded(t, ratio, slack):
    """Ratio does not exceed its value at the start of the last decade."""
    start = int(np.searchsorted(t, t[-1] / 10.0))
    ref = ratio[start]
    tail_max = float(np.max(ratio[start:]))
    return tail_max <= ref * (1 + slack), tail_max / ref - 1


def check_H3(samples: GrowthBoundSamples, beta: float, n: int | None = None,
             two_star: float | None = None, C1: float | None = None,
             slack: float = SLACK) -> Verdict:
    """Balance condition g2^e <= C1 t^(2 beta) g1 with e = (n-2)/n (or 2/2* for n = 2).

    With ``C1`` given the inequality is checked at every radius. Otherwise the
    minimal C1 over the grid is returned and the verdict requires the ratio
    to stay below its value at the start of the last decade, a finite-grid
    proxy for boundedness as t grows.
    """
    n = samples.n if n is None else n
    e = balance_exponent(n, beta, two_star)
    t = samples.t_grid
    ratio = samples.g2**e / (t ** (2 * beta) * samples.g1)
    cmin = float(np.max(ratio))
    if C1 is not None:
        bad = np.nonzero(ratio > C1 * (1 + slack))[0]
        ok = bad.size == 0
        w = None if ok else {"t": float(t[bad[0]]), "needed_C1": float(ratio[bad[0]])}
        return Verdict("H3_balance", bool(ok), float(C1 / cmin - 1), cmin, w, f"beta={beta}, exponent={e:.6g}")
    ok, growth = _tail_bounded(t, ratio, slack)
    w = None if ok else {"tail_growth": growth, "t_max": float(t[-1])}
    return Verdict("H3_balance", bool(ok), float(-growth), cmin, w, f"beta={beta}, exponent={e:.6g}")


def check_H4(samples: GrowthBoundSamples, alpha: float, C2: float | None = None,
             slack: float = SLACK) -> Verdict:
    """Growth condition g2(|xi|) |xi|^2 <= C2 (1 + f(xi))^alpha.

    The worst sampled xi on each sphere is the one with the smallest f.
    """
    t = samples.t_grid
    ratio = samples.g2 * t**2 / (1 + samples.fmin) ** alpha
    cmin = float(np.max(ratio))
    if C2 is not None:
        bad = np.nonzero(ratio > C2 * (1 + slack))[0]
        ok = bad.size == 0
        w = None if ok else {"t": float(t[bad[0]]), "needed_C2": float(ratio[bad[0]])}
        return Verdict("H4_growth", bool(ok), float(C2 / cmin - 1), cmin, w, f"alpha={alpha}")
    ok, growth = _tail_bounded(t, ratio, slack)
    w = None if ok else {"tail_growth": growth, "t_max": float(t[-1])}
    return Verdict("H4_growth", bool(ok), float(-growth), cmin, w, f"alpha={alpha}")


def check_H5(f: EnergyDensity, t_grid, n_dirs: int = 256, seed: int = 0, n: int | None = None) -> Verdict:
    """Superlinear growth proxy for min_{|xi|=t} f(xi)/t.

    Passes when the ratio is strictly increasing over the last decade of the
    grid and its final value exceeds twice its first value.
    """
    t = np.asarray(t_grid, dtype=float)
    if t[-1] < 100 * t[0]:
        raise ValueError("the superlinearity grid must span at least two decades")
    n = f.dim(n)
    dirs = sphere_directions(n, n_dirs, seed)
    with np.errstate(over="ignore"):
        ratio = f.eval(t[:, None, None] * dirs[None]).min(axis=1) / t
    if not np.all(np.isfinite(ratio)):
        raise ValueError("f overflowed on the superlinearity grid; lower its upper end")
    start = int(np.searchsorted(t, t[-1] / 10.0))
    tail = ratio[start:]
    inc = bool(np.all(np.diff(tail) > 0))
    doubled = bool(ratio[-1] > 2 * ratio[0])
    w = None if (inc and doubled) else {"first": float(ratio[0]), "last": float(ratio[-1]), "tail_increasing": inc}
    return Verdict("H5_superlinear", inc and doubled, float(ratio[-1] / (2 * ratio[0]) - 1), None, w,
                   f"f/t from {ratio[0]:.6g} to {ratio[-1]:.6g} on [{t[0]:.6g}, {t[-1]:.3g}]")


# ---------------------------------------------------------------------------
# p-q family


@dataclass(frozen=True)
class ExponentSet:
    """Growth exponents 1 < p <= q <= 2 in dimension n, with derived quantities."""

    n: int
    p: float
    q: float
    m: float | None = None
    M: float | None = None

    def __post_init__(self):
        if not 1 < self.p <= self.q <= 2:
            raise ValueError(f"need 1 < p <= q <= 2, got p={self.p}, q={self.q}")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    @property
    def r(self):
        return 2 * self.p - self.q

    @property
    def s(self):
        return (self.p / self.q) * (self.q - 2) + 2

    @property
    def beta_bar(self):
        n, p, q = self.n, self.p, self.q
        return (n - 2) * q / (2 * n) - p / 2 + 2 / n

    @property
    def alpha_bar(self):
        return self.q / self.p

    @property
    def theta_pq(self):
        den = (self.n + 2) * self.p - self.n * self.q
        return 2.0 / den if den > 0 else math.inf

    @property
    def sobolev_conjugate(self):
        return self.n * self.p / (self.n - self.p) if self.p < self.n else math.inf


def beta_bar(n, p, q):
    """(n-2) q/(2n) - p/2 + 2/n; vectorized, no range checks."""
    return (n - 2) * np.asarray(q) / (2 * n) - np.asarray(p) / 2 + 2 / n


def corollary_conditions(es: ExponentSet) -> dict:
    """Closed-form applicability conditions of the p-q family."""
    n, p, q, r, s = es.n, es.p, es.q, es.r, es.s
    out = {}
    out["pq"] = Verdict("pq_ratio", q / p < 1 + 2 / n, 1 + 2 / n - q / p, None, None, "q/p < 1 + 2/n")
    out["aniso"] = Verdict("aniso_p", p > 2 * n / (n + 2), p - 2 * n / (n + 2), None, None, "p > 2n/(n+2)")
    lhs, rhs = s, 2 * p / n + r
    out["ex1"] = Verdict("ex1_rs", lhs < rhs, rhs - lhs, None, {"s": s, "bound": rhs}, "s < 2p/n + r")
    out["ex1_equiv"] = Verdict("ex1_ratio", q / p < 1 + 2 / n - 2 * (1 / p - 1 / q),
                               1 + 2 / n - 2 * (1 / p - 1 / q) - q / p, None, None,
                               "q/p < 1 + 2/n - 2 (1/p - 1/q)")
    pstar = es.sobolev_conjugate
    out["ex2"] = Verdict("ex2_sobolev", q < pstar, pstar - q, None,
                         {"p_star": pstar if math.isfinite(pstar) else "inf"}, "q < np/(n-p)")
    return out


def remark_comparison(es: ExponentSet) -> dict:
    """Thresholds for s: (1 + 2/n) r from the p-q bound versus 2p/n + r."""
    t_pq = (1 + 2 / es.n) * es.r
    t_ex = 2 * es.p / es.n + es.r
    return {"threshold_pq": t_pq, "threshold_ex1": t_ex, "ordered": t_pq <= t_ex,
            "s": es.s, "s_below_pq": es.s < t_pq, "s_below_ex1": es.s < t_ex}


def pfq_bounds_check(f: EnergyDensity, p: float, q: float, m: float, M: float, t_grid,
                     n_dirs: int = 256, seed: int = 0, n: int | None = None) -> Verdict:
    """Growth sandwich implied by two-sided power ellipticity.

    Lower m/(2(p-1)) t^p (or (m/2) t log t for p = 1), upper 2M/(q-1) t^q
    (or 2M t log t for q = 1). Returns the smallest grid radius from which
    both hold on the rest of the grid.
    """
    t = np.asarray(t_grid, dtype=float)
    n = f.dim(n)
    dirs = sphere_directions(n, n_dirs, seed)
    fv = f.eval(t[:, None, None] * dirs[None])
    lo = m / 2 * t * np.log(t) if p == 1 else m / (2 * (p - 1)) * t**p
    hi = 2 * M * t * np.log(t) if q == 1 else 2 * M / (q - 1) * t**q
    ok = (fv.min(axis=1) >= lo) & (fv.max(axis=1) <= hi)
    bad = np.nonzero(~ok)[0]
    start = int(bad[-1] + 1) if bad.size else 0
    if start >= t.size:
        return Verdict("pfq_sandwich", False, float("nan"), None, {"t": float(t[-1])}, "never holds on grid")
    return Verdict("pfq_sandwich", True, float(np.min(fv.min(axis=1)[start:] / lo[start:]) - 1), None,
                   {"t_bar": float(t[start])}, f"holds for t >= {t[start]:.6g}")


def sqrt_sum_sandwich_check(f, xi) -> Verdict:
    """n^(-p/2) (1+|xi|^2)^(p/2) <= f(xi) <= sqrt(n) (1+|xi|^2)^(q/2) at the given points."""
    p, q = f.exponents
    n = f.n
    s = 1 + np.sum(np.asarray(xi) ** 2, axis=-1)
    v = f.eval(xi)
    lo = n ** (-p / 2) * s ** (p / 2)
    hi = math.sqrt(n) * s ** (q / 2)
    ok = bool(np.all(lo <= v * (1 + 1e-14)) and np.all(v <= hi * (1 + 1e-14)))
    return Verdict("sqrt_sum_sandwich", ok, float(min(np.min(v / lo), np.min(hi / v)) - 1))


# ---------------------------------------------------------------------------
# Schedules of exponents


@dataclass(frozen=True)
class IterationSchedule:
    n: int
    beta: float
    two_star: float
    recursion: np.ndarray
    closed_form: np.ndarray
    normalized: np.ndarray
    limit: float
    admissible: bool


def iteration_schedule(n: int, beta, two_star=None, i_max: int = 200) -> IterationSchedule:
    """delta_0 = 2, delta_{i+1} = (delta_i - 2 beta) 2*/2, with closed form and normalized limit.

    Admissibility (delta_i >= 2 for every i with a positive limit) is decided
    in exact rational arithmetic from the given beta and 2*.
    """
    ts = two_star if two_star is not None else (Fraction(2 * n, n - 2) if n > 2 else sobolev_exponent(n, float(beta)))
    ts_f, b_f = float(ts), float(beta)
    rec = np.empty(i_max + 1)
    rec[0] = 2.0
    for i in range(i_max):
        rec[i + 1] = (rec[i] - 2 * b_f) * ts_f / 2
    k = b_f * ts_f / (ts_f - 2)
    idx = np.arange(i_max + 1)
    ratio = ts_f / 2
    closed = 2 * ratio**idx * (1 - k) + 2 * k
    normalized = rec / ratio**idx
    limit = 2 - b_f * 2 * ts_f / (ts_f - 2)
    exact_b = Fraction(beta) if not isinstance(beta, Fraction) else beta
    exact_ts = Fraction(ts) if not isinstance(ts, Fraction) else ts
    admissible = exact_b < 1 - Fraction(2) / exact_ts
    return IterationSchedule(n, b_f, ts_f, rec, closed, normalized, limit, bool(admissible))


# ---------------------------------------------------------------------------
# Orchestration


@dataclass
class AnalysisReport:
    spec: str
    n: int
    params: dict
    grid: dict
    verdicts: dict
    theta: float
    corollary: dict = field(default_factory=dict)
    exponents: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def to_dict(self):
        return {
            "integrand": self.spec,
            "n": self.n,
            "params": self.params,
            "grid": self.grid,
            "theta": self.theta,
            "passed": self.passed,
            "verdicts": {k: v.as_dict() for k, v in self.verdicts.items()},
            "corollary": {k: (v.as_dict() if isinstance(v, Verdict) else v) for k, v in self.corollary.items()},
            "exponents": self.exponents,
            "sweep": self.sweep,
        }


MU_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
NBETA_GRID = (1.02, 1.05, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 1.95)
ALPHA_GRID = (1.02, 1.05, 1.1, 1.2, 1.3, 1.5, 1.6, 1.75, 1.85, 1.9, 1.95, 2.0, 2.5, 3.0, 4.0, 6.0)


def _evaluate(samples, mu, beta, alpha, n, two_star, C1, C2):
    start = h2_onset(samples, mu)
    t = samples.t_grid
    if start >= t.size - 2 or t[-1] < 10 * t[start]:
        return start, None
    tail = samples.restrict(start)
    v = {
        "H2": check_H2(tail, mu),
        "H3": check_H3(tail, beta, n, two_star, C1),
        "H4": check_H4(tail, alpha, C2),
    }
    v["AB"], theta = check_ab(mu, alpha, beta, n)
    return start, (v, theta)


def sweep_params(samples: GrowthBoundSamples, n: int, two_star_factor: float = TWO_STAR_FACTOR,
                 C1=None, C2=None):
    """Grid search over (mu, beta, alpha) for a passing combination with the smallest theta.

    Returns ``(best, counts)`` where ``best`` is a dict with the parameters,
    or ``None`` when no combination passes.
    """
    best = None
    tried = passed = 0
    onsets = {}
    for mu in MU_GRID:
        onsets[mu] = h2_onset(samples, mu)
    for mu, nb, alpha in itertools.product(MU_GRID, NBETA_GRID, ALPHA_GRID):
        beta = nb / n
        ts = sobolev_exponent(n, beta, two_star_factor) if n == 2 else None
        tried += 1
        margin = 2 - mu - alpha * (n * beta - mu)
        if margin <= 0:
            continue
        _, res = _evaluate(samples, mu, beta, alpha, n, ts, C1, C2)
        if res is None:
            continue
        v, theta = res
        if all(x.passed for x in v.values()):
            passed += 1
            key = (theta, onsets[mu])
            if best is None or key < best["key"]:
                best = {"mu": float(mu), "beta": float(beta), "alpha": float(alpha), "two_star": ts,
                        "theta": float(theta), "key": key}
    if best is not None:
        best.pop("key")
    return best, {"tried": tried, "passed": passed}


def analyze(f: EnergyDensity, n: int | None = None, mu: float | None = None, beta: float | None = None,
            alpha: float | None = None, two_star: float | None = None, t_min: float | None = None,
            t_max: float = 1e4, n_t: int = 200, n_dirs: int = 256, seed: int = 0,
            C1: float | None = None, C2: float | None = None, h5_t_max: float = 1e60,
            two_star_factor: float = TWO_STAR_FACTOR) -> AnalysisReport:
    """Check every structural condition for ``f`` and report the verdicts.

    When any of (mu, beta, alpha) is missing, a documented grid sweep picks
    the passing combination with the smallest theta.
    """
    n = f.dim(n if n is not None else (None if f.n is not None else 2))
    t_min = f.t0 + 1.0 if t_min is None else float(t_min)
    t_grid = np.geomspace(t_min, t_max, n_t)
    samples = sample_growth_bounds(f, t_grid, n_dirs, seed, n)
    sweep_info = {}
    if mu is None or beta is None or alpha is None:
        best, counts = sweep_params(samples, n, two_star_factor, C1, C2)
        sweep_info = {"grid_mu": list(MU_GRID), "grid_n_beta": list(NBETA_GRID),
                      "grid_alpha": list(ALPHA_GRID), **counts}
        if best is None:
            # report the most permissive choice so the failing conditions are visible
            mu = 0.0 if mu is None else mu
            beta = 1.1 / n if beta is None else beta
            alpha = 1.1 if alpha is None else alpha
            sweep_info["found"] = False
        else:
            mu = best["mu"] if mu is None else mu
            beta = best["beta"] if beta is None else beta
            alpha = best["alpha"] if alpha is None else alpha
            sweep_info["found"] = True
    if n == 2 and two_star is None:
        two_star = sobolev_exponent(2, beta, two_star_factor)
    hp = HypothesisParams(mu, beta, alpha, n, two_star if n == 2 else None)

    verdicts = {"H1": check_H1(samples)}
    start, res = _evaluate(samples, hp.mu, hp.beta, hp.alpha, n, two_star, C1, C2)
    if res is None:
        fail = Verdict("H2_monotonicity", False, float("nan"), None,
                       {"onset_t": float(t_grid[min(start, t_grid.size - 1)])},
                       "monotonicity does not settle at least one decade before the grid end")
        verdicts["H2"] = fail
        verdicts["H3"] = check_H3(samples, hp.beta, n, two_star, C1)
        verdicts["H4"] = check_H4(samples, hp.alpha, C2)
        verdicts["AB"], theta = check_ab(hp.mu, hp.alpha, hp.beta, n)
    else:
        v, theta = res
        verdicts.update(v)
    h5_grid = np.geomspace(t_min, max(h5_t_max, 100 * t_min), 400)
    verdicts["H5"] = check_H5(f, h5_grid, n_dirs, seed, n)

    corollary, exps = {}, {}
    if f.exponents is not None and f.exponents[0] > 1:
        p, q = f.exponents
        es = ExponentSet(n, p, q)
        exps = {"p": p, "q": q, "r": es.r, "s": es.s, "beta_bar": es.beta_bar,
                "alpha_bar": es.alpha_bar, "theta_pq": es.theta_pq}
        conds = corollary_conditions(es)
        corollary = {"applicable": f.corollary, **conds}
        if p < q:
            corollary["remark"] = remark_comparison(es)

    grid = {"t_min": float(t_min), "t_max": float(t_max), "n_t": int(n_t), "spacing": "geometric",
            "onset_t": float(t_grid[min(start, t_grid.size - 1)]), "h5_t_max": float(h5_grid[-1]),
            "n_dirs": int(n_dirs), "seed": int(seed)}
    params = {"mu": hp.mu, "beta": hp.beta, "alpha": hp.alpha, "two_star": hp.sobolev,
              "C1": verdicts["H3"].constant, "C2": verdicts["H4"].constant}
    return AnalysisReport(f.spec_string, n, params, grid, verdicts, float(theta), corollary, exps, sweep_info)
