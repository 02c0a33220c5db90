"""Gaussian quadrature rules and the integrators built on them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, special

DEFAULT_ORDER = 16


class RuleKind(str, enum.Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    GENERALIZED_GAUSS_LAGUERRE = "generalized_gauss_laguerre"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    kind: RuleKind
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)


def _recurrence(kind: RuleKind, order: int, beta: float):
    k = np.arange(order, dtype=float)
    if kind is RuleKind.GAUSS_LEGENDRE:
        diag = np.zeros(order)
        j = k[1:]
        off = j / np.sqrt(4 * j * j - 1)
        mu0 = 2.0
    else:
        diag = 2 * k + beta + 1
        j = k[1:]
        off = np.sqrt(j * (j + beta))
        mu0 = math.gamma(beta + 1)
    return diag, off, mu0


def _orthonormal_sums(x, diag, off, order):
    """Sum of p_k(x)^2 for k < order, plus p_order(x) and its derivative."""
    p_prev = np.zeros_like(x)
    dp_prev = np.zeros_like(x)
    p = np.ones_like(x)
    dp = np.zeros_like(x)
    acc = np.ones_like(x)
    for i in range(order):
        back = off[i - 1] if i > 0 else 0.0
        p_next = ((x - diag[i]) * p - back * p_prev) / off[i]
        dp_next = (p + (x - diag[i]) * dp - back * dp_prev) / off[i]
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        if i < order - 1:
            acc += p * p
    return acc, p, dp


def build_rule(kind, order: int = DEFAULT_ORDER, beta: float | None = None) -> QuadratureRule:
    """Nodes and weights from the Jacobi matrix of the three-term recurrence.

    Weights come from the Christoffel function rather than from eigenvector
    components, which keeps the far Laguerre weights positive at high order.
    """
    kind = RuleKind(kind)
    if int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order}")
    order = int(order)
    if kind is RuleKind.GENERALIZED_GAUSS_LAGUERRE:
        beta = 0.0 if beta is None else float(beta)
        if not beta > -1:
            raise ValueError(f"Laguerre exponent beta must be > -1, got {beta}")
    else:
        beta = None
    diag, off, mu0 = _recurrence(kind, order + 1, beta or 0.0)
    if order == 1:
        nodes = diag[:1].copy()
    else:
        nodes = linalg.eigh_tridiagonal(diag[:order], off[: order - 1], eigvals_only=True)
    nodes = np.sort(nodes)

    for _ in range(2):
        acc, pn, dpn = _orthonormal_sums(nodes, diag, off, order)
        nodes = nodes - pn / dpn
    acc, _, _ = _orthonormal_sums(nodes, diag, off, order)
    weights = mu0 / acc
    return QuadratureRule(kind, order, nodes, weights, beta)


@lru_cache(maxsize=64)
def cached_rule(kind, order: int = DEFAULT_ORDER, beta: float | None = None) -> QuadratureRule:
    return build_rule(kind, order, beta)


def legendre(order: int = DEFAULT_ORDER) -> QuadratureRule:
    return cached_rule(RuleKind.GAUSS_LEGENDRE, order)


def laguerre(order: int = DEFAULT_ORDER, beta: float = 0.0) -> QuadratureRule:
    return cached_rule(RuleKind.GENERALIZED_GAUSS_LAGUERRE, order, float(beta))


def integrate_finite(f, lo: float, hi: float, rule: QuadratureRule | None = None) -> float:
    """Integrate ``f`` over ``[lo, hi]`` with an affinely mapped Legendre rule."""
    rule = rule or legendre()
    if rule.kind is not RuleKind.GAUSS_LEGENDRE:
        raise ValueError("finite-interval integration needs a Gauss-Legendre rule")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    half = 0.5 * (hi - lo)
    x = lo + half * (rule.nodes + 1.0)
    return float(half * np.dot(rule.weights, np.asarray(f(x), dtype=float)))


def time_nodes(t, order: int = 32):
    """Nodes/weights on (0, t) after the substitution ``theta = t (1 - v^2)``.

    ``t`` may be an array; the result has shape ``t.shape + (order,)``.  The
    Jacobian ``2 t v`` cancels a ``1/sqrt(t - theta)`` endpoint singularity.
    """
    rule = legendre(order)
    v = 0.5 * (rule.nodes + 1.0)
    t = np.asarray(t, dtype=float)[..., None]
    theta = t * (1.0 - v * v)
    weights = 0.5 * rule.weights * 2.0 * t * v
    return theta, weights


def integrate_time(f, t: float, rule_order: int = 32) -> float:
    if not t > 0:
        raise ValueError(f"horizon must be > 0, got {t}")
    theta, weights = time_nodes(t, rule_order)
    return float(np.sum(weights * np.asarray(f(theta), dtype=float)))


# --------------------------------------------------------------------------
# I(a, b, c, d) = int_0^inf exp(-a (x - b)^2) Phi(c x + d) dx
# --------------------------------------------------------------------------

# lower cut of the [0, b] piece, in units of 1/sqrt(a); exp(-6.5^2) ~ 5e-19
_GAUSS_CUT = 6.5
# beyond this many widths below zero the signed split cancels too much
_SPLIT_LIMIT = 2.0


def _tail(a, b, c, d, order):
    """int_b^inf exp(-a (x-b)^2) Phi(c x + d) dx via even/odd Laguerre rules.

    With ``w = sqrt(a) (x - b)`` and ``y = w^2`` the integrand is
    ``y^(-1/2) e^(-y) h(sqrt(y)) / (2 sqrt(a))``.  The even part of ``h`` is a
    smooth function of ``y`` (rule with beta = -1/2); the odd part divided by
    ``sqrt(y)`` is too (rule with beta = 0).
    """
    half = laguerre(order, -0.5)
    full = laguerre(order, 0.0)
    sa = np.sqrt(a)[..., None]
    k = c[..., None] / sa
    e = (c * b + d)[..., None]
    w = np.sqrt(half.nodes)
    even = 0.5 * (special.ndtr(e + k * w) + special.ndtr(e - k * w))
    w0 = np.sqrt(full.nodes)
    odd = 0.5 * (special.ndtr(e + k * w0) - special.ndtr(e - k * w0)) / w0
    return (even @ half.weights + odd @ full.weights) / (2 * sa[..., 0])


def _finite(a, b, c, d, lo, hi, order):
    rule = legendre(order)
    half = 0.5 * (hi - lo)[..., None]
    x = lo[..., None] + half * (rule.nodes + 1.0)
    vals = np.exp(-a[..., None] * (x - b[..., None]) ** 2) * special.ndtr(
        c[..., None] * x + d[..., None]
    )
    return (vals * half) @ rule.weights


def _deep_tail(a, b, c, d, order):
    """``exp(a b^2) * I`` for ``b`` far below zero.

    Uses ``y = a x (x - 2 b)`` so that the Gaussian becomes ``e^-y`` exactly.
    """
    rule = laguerre(order, 0.0)
    y = rule.nodes
    ab2 = (a * b * b)[..., None]
    x = b[..., None] + np.sqrt(y / a[..., None] + (b * b)[..., None])
    vals = special.ndtr(c[..., None] * x + d[..., None]) / np.sqrt(y + ab2)
    return (vals @ rule.weights) / (2 * np.sqrt(a))


def integral_I_scaled(a, b, c, d, order: int = DEFAULT_ORDER):
    """Return ``(log_scale, mantissa)`` with ``I = exp(log_scale) * mantissa``.

    Vectorised over broadcast ``a, b, c, d``.  The scale is nonzero only when
    ``b`` lies many widths below zero, where ``I`` itself would underflow.
    """
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d)))
    if np.any(a <= 0):
        raise ValueError("integral_I needs a > 0")
    sa = np.sqrt(a)
    log_scale = np.zeros(a.shape)
    out = np.zeros(a.shape)

    pos = b > 0
    if np.any(pos):
        ap, bp, cp, dp = a[pos], b[pos], c[pos], d[pos]
        lo = np.maximum(0.0, bp - _GAUSS_CUT / np.sqrt(ap))
        out[pos] = _finite(ap, bp, cp, dp, lo, bp, order) + _tail(ap, bp, cp, dp, order)

    near = (~pos) & (sa * -b <= _SPLIT_LIMIT)
    if np.any(near):
        an, bn, cn, dn = a[near], b[near], c[near], d[near]
        # signed reading of the split: int_0^b = -int_b^0 when b <= 0
        back = np.zeros(an.shape)
        neg = bn < 0
        if np.any(neg):
            back[neg] = _finite(an[neg], bn[neg], cn[neg], dn[neg], bn[neg], np.zeros(neg.sum()), order)
        out[near] = _tail(an, bn, cn, dn, order) - back

    far = (~pos) & ~near
    if np.any(far):
        af, bf = a[far], b[far]
        log_scale[far] = -af * bf * bf
        out[far] = _deep_tail(af, bf, c[far], d[far], order)
    return log_scale, out


def integral_I(a, b, c, d, order: int = DEFAULT_ORDER):
    """``int_0^inf exp(-a (x - b)^2) Phi(c x + d) dx``.

    Split at ``b``: Gauss-Legendre on ``[0, b]`` and generalized
    Gauss-Laguerre on the transformed tail.
    """
    log_scale, mantissa = integral_I_scaled(a, b, c, d, order)
    with np.errstate(under="ignore"):
        out = np.exp(log_scale) * mantissa
    return float(out) if np.ndim(out) == 0 else out



# peak-centred composite variant, accurate relative to the value itself
_PANEL_REACH = 7.0
_PEAK_MARKS = np.array([-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0])
_WIDE_MARKS = np.array([-7.0, -4.0, -2.0, 2.0, 4.0, 7.0])
_STEP_MARKS = np.array([-6.0, -2.0, 0.0, 2.0, 6.0])
# offsets, in decay lengths, used when the peak sits on the x = 0 edge
_EDGE_MARKS = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 48.0])
_BISECTIONS = 40


def _log_integrand_slope(x, a, b, c, d):
    y = c * x + d
    mills = np.exp(-0.5 * y * y - 0.5 * math.log(2 * math.pi) - special.log_ndtr(y))
    slope = -2 * a * (x - b) + c * mills
    curve = -2 * a - c * c * mills * (y + mills)
    return slope, curve


def integral_I_panels(a, b, c, d, order: int = DEFAULT_ORDER):
    """Composite Gauss-Legendre evaluation of ``integral_I`` as ``(log_scale, mantissa)``.

    The integrand is log-concave, so it has a single peak on ``[0, inf)``;
    the peak is located by bisection on the log-slope, the scale is the log
    integrand there, and panels are laid out in units of the local width, of
    the Gaussian width and of the width of the normal-cdf step.  Unlike the
    two-piece split this keeps full relative accuracy when the normal-cdf
    factor switches off faster than the Gaussian, or sits deep in its tail.
    """
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d)))
    if np.any(a <= 0):
        raise ValueError("integral_I needs a > 0")
    a, b, c, d = (np.array(v, dtype=float) for v in (a, b, c, d))
    sa = np.sqrt(a)
    # bracket the zero of the (decreasing) log-slope
    step = 1.0 / sa
    lo = b - step
    hi = b + step
    for _ in range(200):
        s_lo, _ = _log_integrand_slope(lo, a, b, c, d)
        s_hi, _ = _log_integrand_slope(hi, a, b, c, d)
        grow_lo = s_lo < 0
        grow_hi = s_hi > 0
        if not (np.any(grow_lo) or np.any(grow_hi)):
            break
        lo = np.where(grow_lo, lo - step, lo)
        hi = np.where(grow_hi, hi + step, hi)
        step = 2 * step
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        s_mid, _ = _log_integrand_slope(mid, a, b, c, d)
        lo = np.where(s_mid > 0, mid, lo)
        hi = np.where(s_mid > 0, hi, mid)
    peak = np.maximum(0.5 * (lo + hi), 0.0)
    edge_slope, curve = _log_integrand_slope(peak, a, b, c, d)
    width = 1.0 / np.sqrt(-curve)
    # a mode left of zero leaves a one-sided exponential decay at the edge
    decay = np.where(edge_slope < 0, 1.0 / np.maximum(-edge_slope, 1e-300), width)
    decay = np.minimum(decay, width)
    log_scale = -a * (peak - b) ** 2 + special.log_ndtr(c * peak + d)

    safe_c = np.where(c != 0, c, 1.0)
    with np.errstate(over="ignore"):
        root = np.where(c != 0, -d / safe_c, peak)
        step_w = np.where(c != 0, 1.0 / np.abs(safe_c), 0.0)
    step_w = np.minimum(step_w, 1e6 / sa)
    left_end = np.maximum(0.0, peak - 8 * width - _PANEL_REACH / sa)
    right_end = peak + 8 * width + _PANEL_REACH / sa
    marks = np.concatenate(
        [
            left_end[..., None],
            right_end[..., None],
            peak[..., None] + _PEAK_MARKS * width[..., None],
            peak[..., None] + _WIDE_MARKS / sa[..., None],
            root[..., None] + _STEP_MARKS * step_w[..., None],
            peak[..., None] + _EDGE_MARKS * decay[..., None],
        ],
        axis=-1,
    )
    marks = np.sort(np.clip(marks, left_end[..., None], right_end[..., None]), axis=-1)
    left, right = marks[..., :-1], marks[..., 1:]
    rule = legendre(order)
    half = 0.5 * (right - left)
    x = left[..., None] + half[..., None] * (rule.nodes + 1.0)
    logf = (
        -a[..., None, None] * (x - b[..., None, None]) ** 2
        + special.log_ndtr(c[..., None, None] * x + d[..., None, None])
        - log_scale[..., None, None]
    )
    mantissa = np.sum((np.exp(logf) @ rule.weights) * half, axis=-1)
    return log_scale, mantissa
