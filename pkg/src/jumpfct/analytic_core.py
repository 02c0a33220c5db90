"""Closed-form quantities for the Wiener process and the jump-Wiener process.

All functions broadcast over numpy arrays in their time/space arguments.
Exponential/normal-tail products are evaluated in log space so that huge
image factors such as ``exp(2*mu*(S - x0)/sigma2)`` never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special, stats

SQRT2 = math.sqrt(2.0)
LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# parameter types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WienerParams:
    """Drift ``mu`` and variance ``sigma2`` per unit time, started at ``x0``."""

    mu: float
    sigma2: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class TwoPoint:
    """Jump of ``+a`` with probability ``eta`` and ``-b`` otherwise."""

    a: float
    b: float
    eta: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("two-point jump amplitudes must be positive")
        # eta in {0, 1} is admitted: the tabulated sweep uses both ends.
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")

    @property
    def mean(self) -> float:
        return self.eta * self.a - (1.0 - self.eta) * self.b

    @property
    def second_moment(self) -> float:
        return self.eta * self.a**2 + (1.0 - self.eta) * self.b**2

    def mgf(self, s):
        with np.errstate(over="ignore"):
            return self.eta * np.exp(self.a * s) + (1.0 - self.eta) * np.exp(-self.b * s)


@dataclass(frozen=True)
class Degenerate:
    """Jumps of fixed upward amplitude ``a``."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"jump amplitude must be > 0, got {self.a}")

    eta = 1.0
    b = 0.0

    @property
    def mean(self) -> float:
        return self.a

    @property
    def second_moment(self) -> float:
        return self.a**2

    def mgf(self, s):
        with np.errstate(over="ignore"):
            return np.exp(self.a * s)


JumpLaw = Union[TwoPoint, Degenerate]


@dataclass(frozen=True)
class Exponential:
    """Poisson pacing with rate ``lam``; ``lam == 0`` switches jumps off."""

    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"rate must be >= 0, got {self.lam}")

    n = 1


@dataclass(frozen=True)
class Erlang:
    """Erlang(n, lam) inter-jump times."""

    n: int
    lam: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"Erlang shape must be a positive integer, got {self.n}")
        if not self.lam >= 0:
            raise ValueError(f"rate must be >= 0, got {self.lam}")


RenewalLaw = Union[Exponential, Erlang]


@dataclass(frozen=True)
class ProcessSpec:
    wiener: WienerParams
    jumps: JumpLaw
    renewals: RenewalLaw
    boundary_s: float

    def __post_init__(self):
        if not self.wiener.x0 < self.boundary_s:
            raise ValueError(
                f"start x0={self.wiener.x0} must lie below the boundary S={self.boundary_s}"
            )

    @property
    def distance(self) -> float:
        return self.boundary_s - self.wiener.x0

    @property
    def lam(self) -> float:
        return self.renewals.lam

    @classmethod
    def build(cls, mu, sigma2, x0, s, lam, a, b=None, eta=1.0, erlang_n=None):
        """Shorthand used by the CLI and tests.

        ``eta == 1`` with no ``b`` gives :class:`Degenerate` jumps.
        """
        if b is None or (eta == 1.0 and b == 0):
            if eta != 1.0:
                raise ValueError("a downward amplitude b is required when eta < 1")
            jumps = Degenerate(a)
        else:
            jumps = TwoPoint(a, b, eta)
        renewals = Exponential(lam) if erlang_n is None else Erlang(erlang_n, lam)
        return cls(WienerParams(mu, sigma2, x0), jumps, renewals, s)


def as_degenerate(jumps: JumpLaw) -> Degenerate:
    if isinstance(jumps, Degenerate):
        return jumps
    if isinstance(jumps, TwoPoint) and jumps.eta == 1.0:
        return Degenerate(jumps.a)
    raise ValueError("operation requires fixed-amplitude upward jumps")


# --------------------------------------------------------------------------
# normal distribution helpers
# --------------------------------------------------------------------------


def std_normal_cdf(z):
    """Standard normal cdf through erfc (no cancellation in either tail)."""
    return 0.5 * special.erfc(-np.asarray(z, dtype=float) / SQRT2)


log_std_normal_cdf = special.log_ndtr


def log_normal_interval(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` for ``lo <= hi``, stable in both tails."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    # work in whichever tail keeps the arguments negative
    flip = lo > 0
    l = np.where(flip, -hi, lo)
    h = np.where(flip, -lo, hi)
    lh = special.log_ndtr(h)
    ll = special.log_ndtr(l)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lh + np.log(-np.expm1(ll - lh))
    return np.where(h <= l, -np.inf, out)


def signed_logsumexp(logs, signs, axis=0):
    """Sum ``sign_i * exp(log_i)`` along ``axis`` without overflow."""
    logs = np.asarray(logs, float)
    top = np.max(logs, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        total = np.sum(signs * np.exp(logs - top), axis=axis)
    return total * np.exp(np.squeeze(top, axis=axis))


def _check_positive_time(t, strict=True):
    t = np.asarray(t, dtype=float)
    bad = (t <= 0) if strict else (t < 0)
    if np.any(bad) or np.any(np.isnan(t)):
        raise ValueError("time must be > 0" if strict else "time must be >= 0")
    return t


def _check_below(w: WienerParams, s: float):
    if not w.x0 < s:
        raise ValueError(f"x0={w.x0} must lie below the boundary S={s}")


# --------------------------------------------------------------------------
# Wiener process
# --------------------------------------------------------------------------


def wiener_transition_pdf(w: WienerParams, x, t):
    t = _check_positive_time(t)
    x = np.asarray(x, dtype=float)
    var = w.sigma2 * t
    return np.exp(-((x - w.x0 - w.mu * t) ** 2) / (2 * var) - 0.5 * (LOG_2PI + np.log(var)))


def log_wiener_fct_pdf(w: WienerParams, s: float, t):
    d = s - w.x0
    return (
        math.log(d)
        - 0.5 * (LOG_2PI + math.log(w.sigma2) + 3 * np.log(t))
        - (d - w.mu * t) ** 2 / (2 * w.sigma2 * t)
    )


def wiener_fct_pdf(w: WienerParams, s: float, t):
    """First-crossing-time density of the Wiener process through ``s``."""
    _check_below(w, s)
    t = _check_positive_time(t)
    return np.exp(log_wiener_fct_pdf(w, s, t))


def wiener_fct_cdf(w: WienerParams, s: float, t):
    """First-crossing-time cdf; defective (limit < 1) when ``mu < 0``."""
    _check_below(w, s)
    t = _check_positive_time(t, strict=False)
    return _wiener_fct_cdf(w.mu, w.sigma2, s - w.x0, t)


def _wiener_fct_cdf(mu, sigma2, d, t):
    # vectorised over mu/d/t; d > 0 and t >= 0 assumed
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        st = np.sqrt(sigma2 * t)
        first = special.ndtr(-(d - mu * t) / st)
        second = np.exp(2 * mu * d / sigma2 + special.log_ndtr(-(d + mu * t) / st))
    out = first + second
    return np.where(t > 0, out, 0.0)


def wiener_fct_cdf_limit(w: WienerParams, s: float) -> float:
    if w.mu >= 0:
        return 1.0
    return math.exp(2 * w.mu * (s - w.x0) / w.sigma2)


def avoiding_pdf(w: WienerParams, s: float, x, t):
    """Density of W(t) at ``x`` restricted to paths that stayed below ``s``.

    ``x == s`` is accepted and returns 0.
    """
    _check_below(w, s)
    t = _check_positive_time(t)
    x = np.asarray(x, dtype=float)
    if np.any(x > s):
        raise ValueError("avoiding density is only defined for x <= S")
    d = s - w.x0
    damp = -np.expm1(-2 * (s - x) * d / (w.sigma2 * t))
    return wiener_transition_pdf(w, x, t) * damp


def log_avoiding_mass_band(w: WienerParams, s: float, a, t):
    """Log of the probability of sitting in (s - a, s) at ``t`` without crossing."""
    mu, sig = w.mu, w.sigma
    d = s - w.x0
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    st = sig * np.sqrt(t)
    direct = log_normal_interval((d - a - mu * t) / st, (d - mu * t) / st)
    image = 2 * mu * d / w.sigma2 + log_normal_interval(-(d + a + mu * t) / st, -(d + mu * t) / st)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = direct + np.log(-np.expm1(np.minimum(image - direct, 0.0)))
    return np.where(image >= direct, -np.inf, out)


def avoiding_mass_band(w: WienerParams, s: float, a, t):
    """Closed form of the integral of the avoiding density over (s - a, s)."""
    _check_below(w, s)
    t = _check_positive_time(t)
    if np.any(np.asarray(a) <= 0):
        raise ValueError("band width must be > 0")
    return np.exp(log_avoiding_mass_band(w, s, a, t))


# --------------------------------------------------------------------------
# jump-Wiener process
# --------------------------------------------------------------------------


def _counting_moments(renewals: RenewalLaw, t: float):
    """Mean and variance of the renewal count N(t)."""
    lam = renewals.lam
    if isinstance(renewals, Exponential) or renewals.n == 1:
        return lam * t, lam * t
    n = renewals.n
    mt = lam * t
    if mt == 0:
        return 0.0, 0.0
    # P{N(t) >= k} = P{Poisson(lam t) >= k n}
    kmax = int((mt + 40 * math.sqrt(mt) + 40) / n) + 2
    k = np.arange(1, kmax + 1)
    tail = stats.poisson.sf(k * n - 1, mt)
    mean = float(tail.sum())
    second = float(((2 * k - 1) * tail).sum())
    return mean, second - mean**2


def process_moments(spec: ProcessSpec, t: float):
    """Mean and variance of X(t) given X(0) = x0."""
    w = spec.wiener
    if t < 0:
        raise ValueError("time must be >= 0")
    en, vn = _counting_moments(spec.renewals, t)
    ej = spec.jumps.mean
    vj = spec.jumps.second_moment - ej**2
    mean = w.x0 + w.mu * t + ej * en
    var = w.sigma2 * t + vj * en + ej**2 * vn
    return mean, var


def process_mgf(spec: ProcessSpec, s_arg, t):
    """Moment generating function of X(t) under Poisson pacing.

    Returns ``inf`` whenever the exponent is beyond the float range.
    """
    if not isinstance(spec.renewals, Exponential):
        raise ValueError("closed-form m.g.f. requires exponential renewals")
    w = spec.wiener
    s_arg = np.asarray(s_arg, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        expo = (
            -spec.lam * t * (1.0 - spec.jumps.mgf(s_arg))
            + (w.x0 + w.mu * t) * s_arg
            + 0.5 * w.sigma2 * t * s_arg**2
        )
        expo = np.where(np.isnan(expo), np.inf, expo)
        return np.exp(expo)


def jump_wiener_density(spec: ProcessSpec, x, t: float, tol: float = 1e-12):
    """Transition density of X(t) as a truncated double Poisson series.

    Terms are added by increasing total jump count until the omitted Poisson
    mass drops below ``tol``.
    """
    if not isinstance(spec.renewals, Exponential):
        raise ValueError("series density requires exponential renewals")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    t = float(_check_positive_time(t))
    w = spec.wiener
    jumps = spec.jumps
    x = np.asarray(x, dtype=float)
    mt = spec.lam * t
    out = np.zeros_like(x)
    covered = 0.0
    total = 0
    while True:
        level = float(stats.poisson.pmf(total, mt)) if mt > 0 else float(total == 0)
        if level > 0:
            ups = np.arange(total + 1)
            split = stats.binom.pmf(ups, total, jumps.eta)
            for j, pj in zip(ups, split):
                if pj == 0:
                    continue
                shift = jumps.a * j - jumps.b * (total - j)
                out = out + level * pj * wiener_transition_pdf(w, x - shift, t)
        covered += level
        total += 1
        if covered >= 1.0 - tol or (mt == 0):
            break
        if total > mt + 60 * math.sqrt(mt) + 200:
            break
    return out
