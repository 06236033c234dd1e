"""Catalog of convex energy densities with closed-form derivatives.

Every density maps gradients ``xi`` of shape ``(..., n)`` to values of shape
``(...)``; ``grad`` returns ``(..., n)`` and ``hess`` returns ``(..., n, n)``.
Radial densities whose profile is only convex (or only defined) outside a
ball ``|xi| < t0`` are continued inside by the even quadratic ``a + b|xi|^2``
matching value and slope at ``t0``; when that quadratic would dip below zero
it is floored at zero, which keeps the density convex and nonnegative.

Densities are immutable after construction and safe to share between threads.

Examples
--------
>>> f = parse_integrand("aniso_power_sum(pi=[2, 2])")
>>> float(f.eval(np.array([1.0, 1.0])))
4.0
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "CatalogError",
    "ParameterError",
    "SingularPointError",
    "EnergyDensity",
    "RadialProfile",
    "RadialDensity",
    "SumDensity",
    "catalog_lookup",
    "catalog_entries",
    "parse_integrand",
    "hess_quadform_aniso",
    "hess_quadform_sqrt_sum",
    "hess_quadform_degenerate",
]

DEGENERATE_CUTOFF = 1e-12


class CatalogError(ValueError):
    """Unknown integrand name or malformed integrand string."""


class ParameterError(ValueError):
    """Parameters outside the admissible range of a catalog entry."""


class SingularPointError(ValueError):
    """Second derivatives requested at a point where they do not exist."""


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return repr(float(v))


def _xi(xi, n=None):
    arr = np.asarray(xi, dtype=float)
    if arr.ndim == 0:
        raise ValueError("xi must have a trailing dimension n")
    if n is not None and arr.shape[-1] != n:
        raise ValueError(f"expected trailing dimension {n}, got {arr.shape[-1]}")
    return arr


class EnergyDensity:
    """Base class: a convex, nonnegative density f on R^n.

    Subclasses implement ``eval``, ``grad`` and ``hess``. ``n`` is ``None``
    for densities defined in every dimension.
    """

    name: str = "density"

    def __init__(self, params: dict, t0: float = 0.0, n: int | None = None):
        self.params = MappingProxyType(dict(params))
        self.t0 = float(t0)
        self.n = n

    # -- interface -------------------------------------------------------
    def eval(self, xi):
        raise NotImplementedError

    def grad(self, xi):
        raise NotImplementedError

    def hess(self, xi):
        raise NotImplementedError

    def __call__(self, xi):
        return self.eval(xi)

    def hess_quadform(self, xi, lam):
        """Second variation ``Q(xi, lam) = lam^T D^2 f(xi) lam``."""
        lam = np.asarray(lam, dtype=float)
        return np.einsum("...i,...ij,...j->...", lam, self.hess(xi), lam)

    def smooth_at(self, xi, margin: float = 0.05):
        """Mask of points at distance > ``margin`` from every non-smooth locus."""
        t = np.linalg.norm(_xi(xi), axis=-1)
        return t > self.t0 + margin

    @property
    def exponents(self) -> tuple[float, float] | None:
        """Growth exponents (p, q) when the entry belongs to the p-q family."""
        return None

    @property
    def corollary(self) -> str | None:
        """Name of the closed-form applicability condition for this entry."""
        return None

    def reference_bounds(self):
        """Closed-form envelopes (g1, g2) of the second variation, if known."""
        return None

    @property
    def spec_string(self) -> str:
        inner = ", ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec_string}>"

    def dim(self, n: int | None = None) -> int:
        if self.n is not None:
            if n is not None and n != self.n:
                raise ValueError(f"{self.spec_string} is defined on R^{self.n}, not R^{n}")
            return self.n
        if n is None:
            raise ValueError(f"{self.spec_string} needs an explicit dimension n")
        return int(n)


# ---------------------------------------------------------------------------
# Radial profiles


@dataclass(frozen=True)
class RadialProfile:
    """A radial profile g with first and second derivatives on (t0, inf).

    ``dg_over_t`` may be given to evaluate g'(t)/t stably near t = 0.
    """

    g: Callable
    dg: Callable
    d2g: Callable
    dg_over_t: Callable | None = None

    def g1_exact(self, t):
        t = np.asarray(t, dtype=float)
        return np.minimum(self.d2g(t), self.dg(t) / t)

    def g2_exact(self, t):
        t = np.asarray(t, dtype=float)
        return np.maximum(self.d2g(t), self.dg(t) / t)


class _ExtendedProfile:
    """Profile g on [t0, inf) continued by max(a + b t^2, 0) on [0, t0)."""

    def __init__(self, profile: RadialProfile, t0: float):
        self.profile = profile
        self.t0 = float(t0)
        if self.t0 > 0:
            dg0 = float(profile.dg(np.array(self.t0)))
            g0 = float(profile.g(np.array(self.t0)))
            if not (math.isfinite(dg0) and math.isfinite(g0)):
                raise ParameterError(f"profile not finite at t0={self.t0}")
            if dg0 < 0:
                raise ParameterError(f"profile decreasing at t0={self.t0}")
            self.b = dg0 / (2.0 * self.t0)
            self.a = g0 - self.b * self.t0**2
        else:
            self.b = self.a = 0.0
        self.t_floor = math.sqrt(-self.a / self.b) if (self.a < 0 and self.b > 0) else 0.0

    def __call__(self, t):
        """Return G, G', G'', G'/t on t >= 0."""
        t = np.asarray(t, dtype=float)
        p = self.profile
        if self.t0 <= 0:
            outside = np.ones(t.shape, dtype=bool)
            ts = t
        else:
            # at t == t0 the continuation is used; some profiles have g'' = inf there
            outside = t > self.t0
            ts = np.where(outside, t, 2.0 * self.t0)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = p.g(ts)
            dg = p.dg(ts)
            d2g = p.d2g(ts)
            if p.dg_over_t is not None:
                dgt = p.dg_over_t(ts)
            else:
                dgt = np.where(ts > 0, dg / np.where(ts > 0, ts, 1.0), d2g)
        if self.t0 <= 0:
            return g, dg, d2g, dgt
        quad = self.a + self.b * t * t
        live = quad > 0
        G = np.where(outside, g, np.where(live, quad, 0.0))
        G1 = np.where(outside, dg, np.where(live, 2 * self.b * t, 0.0))
        G2 = np.where(outside, d2g, np.where(live, 2 * self.b, 0.0))
        Gt = np.where(outside, dgt, np.where(live, 2 * self.b, 0.0))
        return G, G1, G2, Gt

    def kinks(self):
        out = [self.t0] if self.t0 > 0 else []
        if self.t_floor > 0:
            out.append(self.t_floor)
        return out


class RadialDensity(EnergyDensity):
    """f(xi) = G(|xi|) for an extended radial profile G."""

    name = "radial_profile"

    def __init__(self, profile: RadialProfile, t0: float = 0.0, params: dict | None = None,
                 name: str | None = None, n: int | None = None):
        super().__init__(params or {}, t0=t0, n=n)
        if name is not None:
            self.name = name
        self.profile = profile
        self._ext = _ExtendedProfile(profile, t0)

    def eval(self, xi):
        t = np.linalg.norm(_xi(xi, self.n), axis=-1)
        return self._ext(t)[0]

    def grad(self, xi):
        xi = _xi(xi, self.n)
        t = np.linalg.norm(xi, axis=-1)
        _, _, _, gt = self._ext(t)
        return gt[..., None] * xi

    def hess(self, xi):
        xi = _xi(xi, self.n)
        n = xi.shape[-1]
        t = np.linalg.norm(xi, axis=-1)
        _, _, g2, gt = self._ext(t)
        safe = np.where(t > 0, t, 1.0)
        e = xi / safe[..., None]
        ee = e[..., :, None] * e[..., None, :]
        eye = np.eye(n)
        return g2[..., None, None] * ee + gt[..., None, None] * (eye - ee)

    def smooth_at(self, xi, margin: float = 0.05):
        t = np.linalg.norm(_xi(xi), axis=-1)
        ok = t > margin
        for k in self._ext.kinks():
            ok &= np.abs(t - k) > margin
        return ok & (t > self.t0 + margin)

    def radial_g1g2(self, t):
        """Exact min/max of g'' and g'/t at radii t > t0."""
        _, _, g2, gt = self._ext(np.asarray(t, dtype=float))
        return np.minimum(g2, gt), np.maximum(g2, gt)


class SumDensity(EnergyDensity):
    """Sum of densities sharing one dimension."""

    def __init__(self, parts: Sequence[EnergyDensity], name: str, params: dict, n: int | None = None):
        dims = {p.n for p in parts if p.n is not None}
        if len(dims) > 1:
            raise ParameterError(f"parts live in different dimensions {sorted(dims)}")
        n = n if n is not None else (dims.pop() if dims else None)
        super().__init__(params, t0=max(p.t0 for p in parts), n=n)
        self.name = name
        self.parts = tuple(parts)

    def eval(self, xi):
        return sum(p.eval(xi) for p in self.parts)

    def grad(self, xi):
        return sum(p.grad(xi) for p in self.parts)

    def hess(self, xi):
        return sum(p.hess(xi) for p in self.parts)

    def smooth_at(self, xi, margin: float = 0.05):
        ok = np.ones(np.shape(xi)[:-1], dtype=bool)
        for p in self.parts:
            ok &= p.smooth_at(xi, margin)
        return ok


# ---------------------------------------------------------------------------
# Profiles used by the catalog


def power_profile(p: float) -> RadialProfile:
    return RadialProfile(
        g=lambda t: t**p,
        dg=lambda t: p * t ** (p - 1),
        d2g=lambda t: p * (p - 1) * t ** (p - 2),
        dg_over_t=lambda t: p * t ** (p - 2),
    )


def log_profile(a: float) -> RadialProfile:
    """g(t) = t (log t)^a on t >= 1."""

    def dg(t):
        L = np.log(t)
        return L**a + a * L ** (a - 1)

    def d2g(t):
        L = np.log(t)
        out = a * L ** (a - 1) / t
        if a != 1:
            out = out + a * (a - 1) * L ** (a - 2) / t
        return out

    return RadialProfile(g=lambda t: t * np.log(t) ** a, dg=dg, d2g=d2g)


def iterated_logs(t, k: int):
    """Return (L, dL) lists with L[i] = L_{i+1}(t) and dL[i] its derivative."""
    t = np.asarray(t, dtype=float)
    L, dL = [], []
    cur = np.log1p(t)
    der = 1.0 / (1.0 + t)
    for _ in range(k):
        L.append(cur)
        dL.append(der)
        der = der / (1.0 + cur)
        cur = np.log1p(cur)
    return L, dL


def _dLk_and_d2Lk(t, k):
    L, dL = iterated_logs(t, k)
    s = 1.0 / (1.0 + t)
    for i in range(k - 1):
        s = s + dL[i] / (1.0 + L[i])
    return L[-1], dL[-1], -dL[-1] * s


def iterated_log_profile(k: int) -> RadialProfile:
    """g(t) = (1 + t) L_k(t)."""

    def g(t):
        return (1.0 + t) * iterated_logs(t, k)[0][-1]

    def dg(t):
        Lk, dLk, _ = _dLk_and_d2Lk(t, k)
        return Lk + (1.0 + t) * dLk

    def d2g(t):
        _, dLk, d2Lk = _dLk_and_d2Lk(t, k)
        return 2.0 * dLk + (1.0 + t) * d2Lk

    return RadialProfile(g=g, dg=dg, d2g=d2g)


def t_iterated_log_profile(k: int) -> RadialProfile:
    """g(t) = t L_k(t)."""

    def g(t):
        return t * iterated_logs(t, k)[0][-1]

    def dg(t):
        Lk, dLk, _ = _dLk_and_d2Lk(t, k)
        return Lk + t * dLk

    def d2g(t):
        _, dLk, d2Lk = _dLk_and_d2Lk(t, k)
        return 2.0 * dLk + t * d2Lk

    return RadialProfile(g=g, dg=dg, d2g=d2g)


def _convex_from(profile: RadialProfile, start: float, t_hi: float = 1e8) -> float:
    """Smallest t >= start beyond which g'' >= 0 on a dense log grid up to t_hi."""
    grid = np.geomspace(start, t_hi, 4000)
    neg = np.nonzero(profile.d2g(grid) < 0)[0]
    if neg.size == 0:
        return float(start)
    last = neg[-1]
    if last + 1 >= grid.size:
        raise ParameterError("profile is not eventually convex on the sampled range")
    return float(brentq(profile.d2g, grid[last], grid[last + 1], xtol=1e-14))


def _check_convex(profile: RadialProfile, t0: float, what: str):
    grid = np.geomspace(t0, max(1e8, 10 * t0), 4000)
    d2 = profile.d2g(grid)
    if np.any(d2 < -1e-12 * np.abs(profile.dg(grid) / grid)):
        bad = grid[np.argmax(d2 < 0)]
        raise ParameterError(f"{what}: profile not convex beyond t0={t0} (g'' < 0 at t={bad:.6g}); increase t0")


# ---------------------------------------------------------------------------
# Catalog entries


class PowerRegularized(EnergyDensity):
    """f(xi) = (1 + |xi|^2)^(p/2), p > 1."""

    name = "power_regularized"

    def __init__(self, p: float):
        if not p > 1:
            raise ParameterError(f"power_regularized requires p > 1, got p={p}")
        super().__init__({"p": float(p)}, t0=0.0)
        self.p = float(p)
        pp = self.p
        self.profile = RadialProfile(
            g=lambda t: (1 + t * t) ** (pp / 2),
            dg=lambda t: pp * t * (1 + t * t) ** (pp / 2 - 1),
            d2g=lambda t: pp * (1 + t * t) ** (pp / 2 - 2) * (1 + (pp - 1) * t * t),
            dg_over_t=lambda t: pp * (1 + t * t) ** (pp / 2 - 1),
        )

    def eval(self, xi):
        xi = _xi(xi)
        return (1.0 + np.sum(xi * xi, axis=-1)) ** (self.p / 2)

    def grad(self, xi):
        xi = _xi(xi)
        s = 1.0 + np.sum(xi * xi, axis=-1)
        return (self.p * s ** (self.p / 2 - 1))[..., None] * xi

    def hess(self, xi):
        xi = _xi(xi)
        p = self.p
        s = 1.0 + np.sum(xi * xi, axis=-1)
        outer = xi[..., :, None] * xi[..., None, :]
        eye = np.eye(xi.shape[-1])
        return (p * s ** (p / 2 - 2))[..., None, None] * (s[..., None, None] * eye + (p - 2) * outer)

    def smooth_at(self, xi, margin: float = 0.05):
        return np.ones(np.shape(xi)[:-1], dtype=bool)

    def radial_g1g2(self, t):
        return self.profile.g1_exact(t), self.profile.g2_exact(t)

    @property
    def exponents(self):
        return (self.p, self.p)

    @property
    def corollary(self):
        return "pq"


def _log_default_t0(a: float) -> float:
    return max(1.0, math.exp(1.0 - a))


class LogPower(RadialDensity):
    """f(xi) = |xi| (log |xi|)^a for |xi| >= t0 >= 1, a > 0."""

    name = "log_power"

    def __init__(self, a: float, t0: float | None = None):
        if not a > 0:
            raise ParameterError(f"log_power requires a > 0, got a={a}")
        t0 = _log_default_t0(a) if t0 is None else float(t0)
        if t0 < 1:
            raise ParameterError(f"log_power requires t0 >= 1, got t0={t0}")
        if math.log(t0) < 1.0 - a - 1e-12:
            raise ParameterError(
                f"log_power with a={a} is convex only for log t >= 1 - a; need t0 >= {math.exp(1 - a):.6g}")
        super().__init__(log_profile(a), t0=t0, params={"a": float(a), "t0": t0})
        self.a = float(a)

    def reference_bounds(self):
        a = self.a
        return (lambda t: (a / 2) * np.log(t) ** (a - 1) / t,
                lambda t: (1 + a) * np.log(t) ** a / t)


def _iterlog_default_t0(k: int, tlog: bool = False) -> float:
    prof = t_iterated_log_profile(k) if tlog else iterated_log_profile(k)
    return _convex_from(prof, math.e)


def _int_k(k) -> int:
    if float(k) != int(k) or int(k) < 1:
        raise ParameterError(f"k must be a positive integer, got k={k}")
    return int(k)


class IteratedLog(RadialDensity):
    """f(xi) = (1 + |xi|) L_k(|xi|) with L_1 = log(1+t), L_{j+1} = log(1 + L_j)."""

    name = "iterated_log"

    def __init__(self, k: int, t0: float | None = None):
        k = _int_k(k)
        prof = iterated_log_profile(k)
        t0 = _iterlog_default_t0(k) if t0 is None else float(t0)
        if t0 <= 0:
            raise ParameterError("iterated_log requires t0 > 0")
        _check_convex(prof, t0, "iterated_log")
        super().__init__(prof, t0=t0, params={"k": float(k), "t0": t0})
        self.k = k

    def reference_bounds(self):
        k = self.k

        def g1(t):
            L, _ = iterated_logs(t, k)
            prod = np.ones_like(np.asarray(t, dtype=float))
            for i in range(k - 1):
                prod = prod * (1 + L[i])
            return 1.0 / (2 * (1 + t) * prod)

        def g2(t):
            return 2 * iterated_logs(t, k)[0][-1] / (1 + t)

        return g1, g2


class RadialPower(RadialDensity):
    """f(xi) = |xi|^p, continued inside B_t0 when p < 2."""

    name = "radial"

    def __init__(self, p: float, t0: float | None = None):
        if not p > 1:
            raise ParameterError(f"radial requires p > 1, got p={p}")
        t0 = (1.0 if p < 2 else 0.0) if t0 is None else float(t0)
        if p < 2 and t0 <= 0:
            raise ParameterError("radial with p < 2 needs t0 > 0 (second derivatives blow up at 0)")
        super().__init__(power_profile(p), t0=t0, params={"p": float(p), "t0": t0})
        self.p = float(p)

    @property
    def exponents(self):
        return (self.p, self.p)

    @property
    def corollary(self):
        return "pq"


def _check_pi(pi, lo, hi, name, lo_strict=False):
    pi = [float(v) for v in np.atleast_1d(pi)]
    if len(pi) < 2:
        raise ParameterError(f"{name} needs at least two exponents")
    for v in pi:
        if (v <= lo if lo_strict else v < lo) or v > hi:
            rng = f"({lo}, {hi}]" if lo_strict else f"[{lo}, {hi}]"
            raise ParameterError(f"{name} requires every p_i in {rng}, got {v}")
    return pi


class AnisoPowerSum(EnergyDensity):
    """f(xi) = sum_i (1 + xi_i^2)^(p_i/2) with 1 < p_i <= 2."""

    name = "aniso_power_sum"

    def __init__(self, pi):
        pi = _check_pi(pi, 1.0, 2.0, self.name, lo_strict=True)
        super().__init__({"pi": pi}, t0=0.0, n=len(pi))
        self.pi = np.array(pi)

    def eval(self, xi):
        xi = _xi(xi, self.n)
        return np.sum((1 + xi * xi) ** (self.pi / 2), axis=-1)

    def grad(self, xi):
        xi = _xi(xi, self.n)
        return self.pi * xi * (1 + xi * xi) ** (self.pi / 2 - 1)

    def hess(self, xi):
        xi = _xi(xi, self.n)
        p = self.pi
        s = 1 + xi * xi
        d = p * (1 + (p - 1) * xi * xi) * s ** (p / 2 - 2)
        return d[..., :, None] * np.eye(self.n)

    def smooth_at(self, xi, margin: float = 0.05):
        return np.ones(np.shape(xi)[:-1], dtype=bool)

    @property
    def exponents(self):
        return (float(self.pi.min()), 2.0)

    @property
    def corollary(self):
        return "aniso"

    def reference_bounds(self):
        p = float(self.pi.min())
        return (lambda t: p * (p - 1) * (1 + t * t) ** ((p - 2) / 2),
                lambda t: 2.0 * np.ones_like(np.asarray(t, dtype=float)))


class SqrtPowerSum(EnergyDensity):
    """f(xi) = sqrt(sum_i (1 + xi_i^2)^p_i) with 1 <= p_i <= 2."""

    name = "sqrt_power_sum"

    def __init__(self, pi):
        pi = _check_pi(pi, 1.0, 2.0, self.name)
        super().__init__({"pi": pi}, t0=0.0, n=len(pi))
        self.pi = np.array(pi)

    def _parts(self, xi):
        xi = _xi(xi, self.n)
        s = 1 + xi * xi
        S = np.sum(s**self.pi, axis=-1)
        a = self.pi * xi * s ** (self.pi - 1)
        return xi, s, S, a

    def eval(self, xi):
        return np.sqrt(self._parts(xi)[2])

    def grad(self, xi):
        _, _, S, a = self._parts(xi)
        return a / np.sqrt(S)[..., None]

    def hess(self, xi):
        xi, s, S, a = self._parts(xi)
        p = self.pi
        d = p * s ** (p - 2) * (1 + (2 * p - 1) * xi * xi)
        D = d[..., :, None] * np.eye(self.n)
        outer = a[..., :, None] * a[..., None, :]
        return D / np.sqrt(S)[..., None, None] - outer / (S**1.5)[..., None, None]

    def smooth_at(self, xi, margin: float = 0.05):
        return np.ones(np.shape(xi)[:-1], dtype=bool)

    @property
    def exponents(self):
        return (float(self.pi.min()), float(self.pi.max()))

    @property
    def corollary(self):
        return "ex1"

    def reference_bounds(self):
        # claimed envelope pair; the lower one is not valid in general
        p, q, n = float(self.pi.min()), float(self.pi.max()), self.n
        return (lambda t: (p * p - p) / math.sqrt(n) * (1 + t * t) ** (p - 1 - q / 2),
                lambda t: 2 * q * q * (1 + t * t) ** (p * (q - 2) / (2 * q)))

    def lower_envelope(self, t):
        """A valid lower bound for the second variation: p(p-1)/sqrt(n) (1+t^2)^(-q/2)."""
        p, q, n = float(self.pi.min()), float(self.pi.max()), self.n
        return p * (p - 1) / math.sqrt(n) * (1 + np.asarray(t, dtype=float) ** 2) ** (-q / 2)


class DegenerateRadicand(EnergyDensity):
    """h(xi) = sqrt(sum_i |xi_i|^(2 p_i)) with 1 <= p_i <= 2; singular at xi = 0.

    Within ``DEGENERATE_CUTOFF`` of the origin the gradient and Hessian are
    reported as zero.
    """

    name = "degenerate_radicand"

    def __init__(self, pi):
        pi = _check_pi(pi, 1.0, 2.0, self.name)
        super().__init__({"pi": pi}, t0=0.0, n=len(pi))
        self.pi = np.array(pi)

    def _parts(self, xi):
        xi = _xi(xi, self.n)
        ax = np.abs(xi)
        S = np.sum(ax ** (2 * self.pi), axis=-1)
        a = self.pi * np.sign(xi) * ax ** (2 * self.pi - 1)
        near0 = np.linalg.norm(xi, axis=-1) < DEGENERATE_CUTOFF
        Ss = np.where(near0, 1.0, S)
        return xi, ax, S, Ss, a, near0

    def eval(self, xi):
        return np.sqrt(self._parts(xi)[2])

    def grad(self, xi):
        _, _, _, Ss, a, near0 = self._parts(xi)
        g = a / np.sqrt(Ss)[..., None]
        return np.where(near0[..., None], 0.0, g)

    def hess(self, xi):
        xi, ax, _, Ss, a, near0 = self._parts(xi)
        p = self.pi
        d = p * (2 * p - 1) * ax ** (2 * p - 2)
        D = d[..., :, None] * np.eye(self.n)
        outer = a[..., :, None] * a[..., None, :]
        H = D / np.sqrt(Ss)[..., None, None] - outer / (Ss**1.5)[..., None, None]
        return np.where(near0[..., None, None], 0.0, H)

    def smooth_at(self, xi, margin: float = 0.05):
        return np.linalg.norm(_xi(xi), axis=-1) > margin

    @property
    def exponents(self):
        return (float(self.pi.min()), float(self.pi.max()))


class PPlusH(SumDensity):
    """f(xi) = |xi|^p + h(xi), p = min p_i by default."""

    name = "p_plus_h"

    def __init__(self, pi, p: float | None = None, t0: float | None = None):
        pi = _check_pi(pi, 1.0, 2.0, self.name)
        p = min(pi) if p is None else float(p)
        if not 1 < p <= 2:
            raise ParameterError(f"p_plus_h requires 1 < p <= 2, got p={p}")
        radial = RadialPower(p, t0=(1.0 if t0 is None else t0) if p < 2 else 0.0)
        h = DegenerateRadicand(pi)
        super().__init__([radial, h], self.name, {"p": p, "pi": pi, "t0": radial.t0}, n=len(pi))
        self.p = p
        self.pi = np.array(pi)

    @property
    def exponents(self):
        return (self.p, float(self.pi.max()))

    @property
    def corollary(self):
        return "ex2"


def _h_exponents(n, q):
    n = int(n)
    if n < 2 or n != float(n):
        raise ParameterError(f"n must be an integer >= 2, got {n}")
    if not 1 <= q <= 2:
        raise ParameterError(f"requires 1 <= q <= 2, got q={q}")
    return [1.0] * (n - 1) + [float(q)]


class LogPlusH(SumDensity):
    """|xi| (log|xi|)^a + sqrt(sum_{i<n} xi_i^2 + |xi_n|^(2q))."""

    name = "log_plus_h"

    def __init__(self, a: float, q: float, n: int = 2, t0: float | None = None):
        pi = _h_exponents(n, q)
        lg = LogPower(a, t0)
        super().__init__([lg, DegenerateRadicand(pi)], self.name,
                         {"a": float(a), "q": float(q), "n": float(n), "t0": lg.t0}, n=int(n))


class IterlogPlusH(SumDensity):
    """|xi| L_k(|xi|) + sqrt(sum_{i<n} xi_i^2 + |xi_n|^(2q))."""

    name = "iterlog_plus_h"

    def __init__(self, k: int, q: float, n: int = 2, t0: float | None = None):
        k = _int_k(k)
        pi = _h_exponents(n, q)
        prof = t_iterated_log_profile(k)
        t0 = _iterlog_default_t0(k, tlog=True) if t0 is None else float(t0)
        _check_convex(prof, t0, self.name)
        rad = RadialDensity(prof, t0=t0, params={"k": float(k)}, name="t_iterated_log")
        super().__init__([rad, DegenerateRadicand(pi)], self.name,
                         {"k": float(k), "q": float(q), "n": float(n), "t0": t0}, n=int(n))


class SeparableDensity(EnergyDensity):
    """f(xi) = sum_i G(|xi_i|) for an extended one-dimensional profile G."""

    def __init__(self, profile: RadialProfile, t0: float, n: int, name: str, params: dict):
        super().__init__(params, t0=t0, n=int(n))
        self.name = name
        self._ext = _ExtendedProfile(profile, t0)

    def eval(self, xi):
        xi = _xi(xi, self.n)
        return np.sum(self._ext(np.abs(xi))[0], axis=-1)

    def grad(self, xi):
        xi = _xi(xi, self.n)
        return np.sign(xi) * self._ext(np.abs(xi))[1]

    def hess(self, xi):
        xi = _xi(xi, self.n)
        d = self._ext(np.abs(xi))[2]
        return d[..., :, None] * np.eye(self.n)

    def smooth_at(self, xi, margin: float = 0.05):
        ax = np.abs(_xi(xi))
        ok = np.ones(ax.shape, dtype=bool)
        for k in self._ext.kinks():
            ok &= np.abs(ax - k) > margin
        return np.all(ok, axis=-1)


def _sep_log(a: float, n: int = 2, t0: float | None = None):
    lp = LogPower(a, t0)
    return SeparableDensity(lp.profile, lp.t0, int(n), "sep_log_power",
                            {"a": float(a), "n": float(n), "t0": lp.t0})


def _sep_iterlog(k: int, n: int = 2, t0: float | None = None):
    il = IteratedLog(k, t0)
    return SeparableDensity(il.profile, il.t0, int(n), "sep_iterated_log",
                            {"k": float(il.k), "n": float(n), "t0": il.t0})


# name -> (builder, allowed keys, short description)
_CATALOG = {
    "power_regularized": (PowerRegularized, ("p",), "(1+|xi|^2)^(p/2), p > 1"),
    "log_power": (LogPower, ("a", "t0"), "|xi| (log|xi|)^a outside B_t0"),
    "iterated_log": (IteratedLog, ("k", "t0"), "(1+|xi|) L_k(|xi|)"),
    "radial": (RadialPower, ("p", "t0"), "|xi|^p, continued inside B_t0 for p < 2"),
    "aniso_power_sum": (AnisoPowerSum, ("pi",), "sum (1+xi_i^2)^(p_i/2), 1 < p_i <= 2"),
    "sqrt_power_sum": (SqrtPowerSum, ("pi",), "sqrt(sum (1+xi_i^2)^p_i), 1 <= p_i <= 2"),
    "degenerate_radicand": (DegenerateRadicand, ("pi",), "sqrt(sum |xi_i|^(2 p_i)), 1 <= p_i <= 2"),
    "p_plus_h": (PPlusH, ("pi", "p", "t0"), "|xi|^p + sqrt(sum |xi_i|^(2 p_i))"),
    "log_plus_h": (LogPlusH, ("a", "q", "n", "t0"), "|xi|(log|xi|)^a + sqrt(sum_{i<n} xi_i^2 + |xi_n|^(2q))"),
    "iterlog_plus_h": (IterlogPlusH, ("k", "q", "n", "t0"), "|xi| L_k(|xi|) + sqrt(sum_{i<n} xi_i^2 + |xi_n|^(2q))"),
    "sep_log_power": (_sep_log, ("a", "n", "t0"), "sum_i |xi_i| (log|xi_i|)^a"),
    "sep_iterated_log": (_sep_iterlog, ("k", "n", "t0"), "sum_i (1+|xi_i|) L_k(|xi_i|)"),
}


def catalog_entries():
    """List of (name, parameter keys, description)."""
    return [(k, v[1], v[2]) for k, v in sorted(_CATALOG.items())]


def catalog_lookup(name: str, params: dict | None = None) -> EnergyDensity:
    """Build a catalog density by name with validated parameters."""
    if name not in _CATALOG:
        raise CatalogError(f"unknown integrand {name!r}; known: {', '.join(sorted(_CATALOG))}")
    builder, keys, _ = _CATALOG[name]
    params = dict(params or {})
    extra = set(params) - set(keys)
    if extra:
        raise CatalogError(f"{name} does not take parameter(s) {sorted(extra)}; allowed {list(keys)}")
    for k in ("n", "k"):
        if k in params and not isinstance(params[k], (list, tuple)):
            if float(params[k]) != int(params[k]):
                raise ParameterError(f"{k} must be an integer, got {params[k]}")
            params[k] = int(params[k])
    try:
        return builder(**params)
    except TypeError as exc:
        raise CatalogError(f"{name}: {exc}") from None


_NAME_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$", re.S)


def _split_top(s: str):
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise CatalogError("unbalanced brackets")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise CatalogError("unbalanced brackets")
    if "".join(cur).strip():
        parts.append("".join(cur))
    return [p.strip() for p in parts]


def _parse_value(text: str):
    text = text.strip()
    try:
        if text.startswith("["):
            if not text.endswith("]"):
                raise CatalogError(f"bad list {text!r}")
            return [float(x) for x in _split_top(text[1:-1])]
        return float(text)
    except ValueError:
        raise CatalogError(f"cannot parse number in {text!r}") from None


def parse_integrand(text: str) -> EnergyDensity:
    """Parse ``name(key=value, ..., pi=[a, b])`` into a catalog density."""
    m = _NAME_RE.match(text)
    if not m:
        raise CatalogError(f"malformed integrand string {text!r}")
    name, inner = m.group(1), m.group(2)
    params = {}
    if inner and inner.strip():
        for item in _split_top(inner):
            if "=" not in item:
                raise CatalogError(f"expected key=value, got {item!r}")
            key, val = item.split("=", 1)
            key = key.strip()
            if key in params:
                raise CatalogError(f"duplicate parameter {key!r}")
            params[key] = _parse_value(val)
    return catalog_lookup(name, params)


# ---------------------------------------------------------------------------
# Explicit second-variation formulas, written in the expanded scalar form


def hess_quadform_aniso(xi, lam, p):
    """Q = sum_i p_i (1 + (p_i - 1) xi_i^2)(1 + xi_i^2)^(p_i/2 - 2) lam_i^2."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 1) or np.any(p > 2):
        raise ParameterError("exponents must lie in (1, 2]")
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    terms = p * (1 + (p - 1) * xi**2) * (1 + xi**2) ** (p / 2 - 2) * lam**2
    return np.sum(terms, axis=-1)


def hess_quadform_sqrt_sum(xi, lam, p):
    """Q S^(3/2) = -(v.w)^2 + S sum_i p_i (1+xi_i^2)^(p_i-2)(1+(2p_i-1)xi_i^2) lam_i^2."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 1):
        raise ParameterError("exponents must be >= 1")
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = 1 + xi**2
    S = np.sum(s**p, axis=-1)
    v = p * xi * s ** (p / 2 - 1) * lam
    w = s ** (p / 2)
    vw = np.sum(v * w, axis=-1)
    diag = np.sum(p * s ** (p - 2) * (1 + (2 * p - 1) * xi**2) * lam**2, axis=-1)
    return (-(vw**2) + S * diag) / S**1.5


def hess_quadform_degenerate(xi, lam, p):
    """Second variation of sqrt(sum |xi_i|^(2 p_i)); undefined at xi = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 1):
        raise ParameterError("exponents must be >= 1")
    xi = np.asarray(xi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(np.all(xi == 0, axis=-1)):
        raise SingularPointError("second variation of the degenerate radicand is undefined at xi = 0")
    ax = np.abs(xi)
    S = np.sum(ax ** (2 * p), axis=-1)
    c = np.sign(xi) * p * ax ** (2 * p - 1) * lam
    cross = np.sum(c, axis=-1) ** 2
    diag = np.sum((2 * p * p - p) * ax ** (2 * p - 2) * lam**2, axis=-1)
    return (-cross + S * diag) / S**1.5
