"""Analytical lower bounds for the first-crossing-time density and cdf."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .analytic_core import (
    Exponential,
    ProcessSpec,
    TwoPoint,
    WienerParams,
    _wiener_fct_cdf,
    as_degenerate,
    log_avoiding_mass_band,
    log_wiener_fct_pdf,
    signed_logsumexp,
)
from .quadrature import DEFAULT_ORDER, integral_I_panels, time_nodes

DEFAULT_TIME_ORDER = 32


class BoundKind(str, enum.Enum):
    PDF = "pdf_bound"
    CDF = "cdf_bound"


@dataclass
class BoundCurve:
    times: np.ndarray
    values: np.ndarray
    kind: BoundKind
    attained_n: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("bound grid must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("bound values must be nonnegative")

    def at(self, t, rtol=1e-9):
        """Values at ``t``, which must coincide with grid points."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.times, t), 0, len(self.times) - 1)
        left = np.clip(idx - 1, 0, len(self.times) - 1)
        pick = np.where(
            np.abs(self.times[left] - t) < np.abs(self.times[idx] - t), left, idx
        )
        if not np.allclose(self.times[pick], t, rtol=rtol, atol=1e-12):
            raise ValueError("requested times are not on the bound grid")
        return self.values[pick]


def _check_theta(theta, t):
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(theta <= 0) or np.any(theta >= t):
        raise ValueError("theta must lie strictly inside (0, t)")
    return theta, t


def _poisson_paced(spec: ProcessSpec):
    if not isinstance(spec.renewals, Exponential):
        raise ValueError("this bound needs exponential (Poisson) renewals")
    return spec.renewals.lam


# --------------------------------------------------------------------------
# inner integrals of the density bound
# --------------------------------------------------------------------------


def a_plus_minus(theta, u, t, w: WienerParams, s: float):
    """The pair ``(A_plus, A_minus)`` of the closed-form inner integral."""
    theta, t = _check_theta(theta, t)
    if not w.x0 < s:
        raise ValueError("x0 must lie below the boundary")
    d = s - w.x0
    m = max(u, 0.0)
    tau = t - theta
    root = np.sqrt(w.sigma2 * theta * t * tau)
    kappa = np.sqrt(2 * np.pi * tau / (w.sigma2 * t * theta))
    xi_p = ((m - u) * theta + (d + m) * tau) / root
    xi_m = ((m - u) * theta - (d - m) * tau) / root
    a_plus = np.exp(-0.5 * xi_p**2) - kappa * (d + u) * special.ndtr(-xi_p)
    a_minus = np.exp(-0.5 * xi_m**2) + kappa * (d - u) * special.ndtr(-xi_m)
    return a_plus, a_minus


def _log_inner_terms(theta, u, t, w: WienerParams, s: float):
    """Signed log-terms whose sum is the inner density integral.

    ``A_- - r A_+`` is regrouped so the two Gaussian factors merge into
    ``exp(-xi_-^2/2) (1 - exp(-2 D m / (sigma2 theta)))``; with the two
    normal-tail terms every piece is nonnegative when ``-D < u < D``.
    """
    d = s - w.x0
    m = max(u, 0.0)
    tau = t - theta
    s2 = w.sigma2
    root = np.sqrt(s2 * theta * t * tau)
    xi_p = ((m - u) * theta + (d + m) * tau) / root
    xi_m = ((m - u) * theta - (d - m) * tau) / root
    log_pre = (
        0.5 * np.log(theta / tau)
        - np.log(2 * np.pi * t)
        - (d - u - w.mu * t) ** 2 / (2 * s2 * t)
    )
    log_kappa = 0.5 * np.log(2 * np.pi * tau / (s2 * t * theta))
    with np.errstate(divide="ignore"):
        gauss = log_pre - 0.5 * xi_m**2 + np.log(-np.expm1(-2 * d * m / (s2 * theta)))
    tail_m = log_pre + log_kappa + math.log(abs(d - u)) if d != u else np.full_like(log_pre, -np.inf)
    tail_m = tail_m + special.log_ndtr(-xi_m)
    tail_p = log_pre - 2 * d * u / (s2 * t) + log_kappa + (
        math.log(abs(d + u)) if d != -u else -np.inf
    )
    tail_p = tail_p + special.log_ndtr(-xi_p)
    logs = np.stack(np.broadcast_arrays(gauss, tail_m, tail_p))
    signs = np.array([1.0, math.copysign(1.0, d - u), math.copysign(1.0, d + u)])
    return logs, signs.reshape((3,) + (1,) * (logs.ndim - 1))


def inner_pdf_integral(theta, u, t, w: WienerParams, s: float):
    """Integral over x < S - max(u, 0) of alpha_W(x, theta) g_W(S, t - theta | x + u)."""
    theta, t = _check_theta(theta, t)
    if not w.x0 < s:
        raise ValueError("x0 must lie below the boundary")
    logs, signs = _log_inner_terms(theta, float(u), t, w, s)
    return np.maximum(signed_logsumexp(logs, signs, axis=0), 0.0)


def _inner_time_integral(u, t, w, s, order):
    theta, weights = time_nodes(t, order)
    logs, signs = _log_inner_terms(theta, float(u), t[..., None], w, s)
    vals = np.maximum(signed_logsumexp(logs, signs, axis=0), 0.0)
    return np.sum(weights * vals, axis=-1)


def pdf_lower_bound(spec: ProcessSpec, t, quad_order: int = DEFAULT_TIME_ORDER):
    """Lower bound on the first-crossing-time density at ``t``."""
    lam = _poisson_paced(spec)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("time must be > 0")
    w, s = spec.wiener, spec.boundary_s
    t1 = np.atleast_1d(t_arr)
    base = np.exp(log_wiener_fct_pdf(w, s, t1))
    if lam == 0:
        out = base
    else:
        jumps = spec.jumps
        eta, a = jumps.eta, jumps.a
        total = base.copy()
        if eta > 0:
            total += eta * lam * np.exp(log_avoiding_mass_band(w, s, a, t1))
            total += eta * lam * _inner_time_integral(a, t1, w, s, quad_order)
        if eta < 1:
            total += (1 - eta) * lam * _inner_time_integral(-jumps.b, t1, w, s, quad_order)
        out = np.exp(-lam * t1) * total
    return float(out[0]) if t_arr.ndim == 0 else out


# --------------------------------------------------------------------------
# cdf bounds
# --------------------------------------------------------------------------


def inner_cdf_integral(theta, u, tau, w: WienerParams, s: float, order: int = DEFAULT_ORDER):
    """Integral over x < S - max(u, 0) of alpha_W(x, theta) G_W(S, tau | x + u).

    Written in z = S - max(u, 0) - x as four Gaussian-times-Phi pieces, each an
    instance of ``integral_I``.
    """
    theta, tau_in = np.broadcast_arrays(np.asarray(theta, float), np.asarray(tau, float))
    # tau = 0 contributes nothing; a placeholder keeps the pieces finite
    tau = np.where(tau_in > 0, tau_in, 1.0)
    d = s - w.x0
    mu, s2 = w.mu, w.sigma2
    m = max(u, 0.0)
    gap = m - u
    A = 1.0 / (2 * s2 * theta)
    st = np.sqrt(s2 * tau)
    c = -1.0 / st
    k = 2 * mu / s2
    log_norm = -0.5 * np.log(2 * np.pi * s2 * theta)

    centres = (d - m - mu * theta, -d - m - mu * theta)
    log_coef = (log_norm, log_norm + 2 * mu * d / s2)
    logs, mants, signs = [], [], []
    for centre, lc, sign in zip(centres, log_coef, (1.0, -1.0)):
        # Phi((mu tau - y)/st), y = z + gap
        ls, mt = integral_I_panels(A, centre, c, (mu * tau - gap) / st, order)
        logs.append(lc + ls)
        mants.append(mt)
        signs.append(sign)
        # exp(2 mu y / s2) Phi(-(y + mu tau)/st): shift the Gaussian centre
        shifted = centre + k * s2 * theta
        extra = k * centre + 0.5 * k * k * s2 * theta + k * gap
        ls, mt = integral_I_panels(A, shifted, c, -(gap + mu * tau) / st, order)
        logs.append(lc + extra + ls)
        mants.append(mt)
        signs.append(sign)
    logs = np.stack(logs)
    mants = np.stack(mants)
    signs = np.array(signs).reshape((4,) + (1,) * theta.ndim)
    live = mants != 0
    top = np.max(np.where(live, logs, -np.inf), axis=0)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        total = np.sum(np.where(live, signs * mants * np.exp(logs - top), 0.0), axis=0)
        out = total * np.exp(top)
    return np.where(tau_in > 0, np.maximum(out, 0.0), 0.0)


def _log_erlang_pdf(n, lam, theta):
    return math.log(lam) + (n - 1) * np.log(lam * theta) - lam * theta - special.gammaln(n)


def _erlang_survival(n, lam, t):
    return special.gammaincc(n, lam * np.asarray(t, dtype=float))


def _bx_curve(w, s, lam, n, up, down, eta, t, quad_order, x_order, chunk=256):
    """Three-term bound with Erlang(n, lam) renewals and jumps ``+up`` (prob eta) / ``-down``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d = s - w.x0
    out = _erlang_survival(n, lam, t) * _wiener_fct_cdf(w.mu, w.sigma2, d, t)
    if lam == 0:
        return out
    for lo in range(0, t.size, chunk):
        tc = t[lo : lo + chunk]
        theta, weights = time_nodes(tc, quad_order)
        dens = np.exp(_log_erlang_pdf(n, lam, theta))
        acc = np.zeros(tc.shape)
        if eta > 0:
            band = np.exp(log_avoiding_mass_band(w, s, up, theta))
            acc += eta * np.sum(weights * dens * band, axis=-1)
        tau = tc[:, None] - theta
        carry = _erlang_survival(n, lam, tau) * dens
        inner = np.zeros(theta.shape)
        if eta > 0:
            inner += eta * inner_cdf_integral(theta, up, tau, w, s, x_order)
        if eta < 1:
            inner += (1 - eta) * inner_cdf_integral(theta, -down, tau, w, s, x_order)
        acc += np.sum(weights * carry * inner, axis=-1)
        out[lo : lo + chunk] += acc
    return out


def cdf_bound_BX(spec: ProcessSpec, t, quad_order: int = DEFAULT_TIME_ORDER, x_order: int = DEFAULT_ORDER):
    """First-jump cdf bound under Poisson pacing and two-point or fixed jumps."""
    lam = _poisson_paced(spec)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("time must be > 0")
    jumps = spec.jumps
    down = jumps.b if isinstance(jumps, TwoPoint) else 0.0
    out = _bx_curve(spec.wiener, spec.boundary_s, lam, 1, jumps.a, down, jumps.eta, t_arr, quad_order, x_order)
    return float(out[0]) if t_arr.ndim == 0 else out


def erlang_bound_BXn(
    spec: ProcessSpec, n: int, t, quad_order: int = DEFAULT_TIME_ORDER, x_order: int = DEFAULT_ORDER
):
    """Cdf bound of the comparison process with Erlang(n) pacing and jumps of size n*a."""
    lam = _poisson_paced(spec)
    jumps = as_degenerate(spec.jumps)
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("time must be > 0")
    out = _bx_curve(spec.wiener, spec.boundary_s, lam, int(n), n * jumps.a, 0.0, 1.0, t_arr, quad_order, x_order)
    return float(out[0]) if t_arr.ndim == 0 else out


def default_n_max(spec: ProcessSpec) -> int:
    a = as_degenerate(spec.jumps).a
    return int(math.ceil(spec.distance / a)) + 2


def cdf_lower_bound(
    spec: ProcessSpec,
    t_grid,
    n_max: int | None = None,
    quad_order: int = DEFAULT_TIME_ORDER,
    x_order: int = DEFAULT_ORDER,
) -> BoundCurve:
    """Running maximum over the grid of the best comparison-process bound."""
    as_degenerate(spec.jumps)
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a nonempty 1-d sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be positive and strictly increasing")
    n_max = default_n_max(spec) if n_max is None else int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    family = np.stack([erlang_bound_BXn(spec, n, grid, quad_order, x_order) for n in range(1, n_max + 1)])
    best = np.argmax(family, axis=0)
    sup = family[best, np.arange(grid.size)]
    # running maximum, remembering which n produced it
    run_idx = np.maximum.accumulate(np.where(sup >= np.maximum.accumulate(sup), np.arange(grid.size), 0))
    values = np.clip(sup[run_idx], 0.0, 1.0)
    attained = best[run_idx] + 1
    return BoundCurve(
        grid, values, BoundKind.CDF, attained_n=attained, meta={"n_max": n_max, "pointwise_sup": sup}
    )


def pdf_bound_curve(spec: ProcessSpec, t_grid, quad_order: int = DEFAULT_TIME_ORDER) -> BoundCurve:
    grid = np.asarray(t_grid, dtype=float)
    return BoundCurve(grid, pdf_lower_bound(spec, grid, quad_order), BoundKind.PDF)
