"""Exact simulation of jump-Wiener first-crossing times and the estimators built on them."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .analytic_core import Erlang, ProcessSpec, TwoPoint, _wiener_fct_cdf, process_moments
from .bounds import BoundCurve
from .estimators import EpanechnikovKDE, KaplanMeier

LOCATE_TOL = 1e-9
DEFAULT_STRIDE = 1 << 16


@dataclass(frozen=True)
class FctSample:
    time: float
    censored: bool


@dataclass(frozen=True)
class FctSamples:
    """Column storage for many draws; iterates as :class:`FctSample`."""

    times: np.ndarray
    censored: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for t, c in zip(self.times, self.censored):
            yield FctSample(float(t), bool(c))

    def __getitem__(self, i):
        return FctSample(float(self.times[i]), bool(self.censored[i]))

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored))


@dataclass(frozen=True)
class SimConfig:
    n_samples: int
    horizon: float
    seed: int = 0
    stream_stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError("n_samples must be a positive integer")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stream_stride < 1:
            raise ValueError("stream_stride must be >= 1")


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    n_effective: int
    n_total: int

    @property
    def standard_error(self):
        """Pointwise standard error of the kernel estimate (Epanechnikov R(K) = 3/5)."""
        return kde_standard_error(self.values, self.n_total, self.bandwidth)


@dataclass
class CdfEstimate:
    jump_times: np.ndarray
    values: np.ndarray
    n_total: int

    def __call__(self, t):
        idx = np.searchsorted(self.jump_times, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, self.values[np.maximum(idx - 1, 0)], 0.0)


# --------------------------------------------------------------------------
# sampler
# --------------------------------------------------------------------------


def substream(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of consecutive sample indices."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def _draw_renewals(spec: ProcessSpec, rng, size):
    lam = spec.lam
    if lam == 0:
        return np.full(size, np.inf)
    shape = spec.renewals.n if isinstance(spec.renewals, Erlang) else 1
    return rng.gamma(shape, 1.0 / lam, size)


def _log_cross_by(s, xl, xr, span, logp, boundary, sigma2):
    """Log of P{bridge from xl to xr over ``span`` reaches the boundary by s}."""
    var = sigma2 * s * (span - s) / span
    sd = np.sqrt(np.maximum(var, 1e-300))
    direct = xl + (xr - xl) * s / span
    image = 2 * boundary - xl + (xr - 2 * boundary + xl) * s / span
    return np.logaddexp(
        special.log_ndtr((direct - boundary) / sd),
        logp + special.log_ndtr((boundary - image) / sd),
    )


def _locate(xl, xr, span, logp, boundary, sigma2, rng):
    """Inverse-cdf draw of the crossing instant inside a bridge, by bisection."""
    target = np.log(rng.random(xl.size)) + np.minimum(logp, 0.0)
    lo = np.zeros_like(span)
    hi = span.copy()
    steps = max(1, int(math.ceil(math.log2(max(float(span.max()), LOCATE_TOL) / LOCATE_TOL))))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = _log_cross_by(mid, xl, xr, span, logp, boundary, sigma2) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _simulate_block(spec: ProcessSpec, rng: np.random.Generator, size: int, horizon: float):
    w = spec.wiener
    big_s = spec.boundary_s
    sig = w.sigma
    jumps = spec.jumps
    down = jumps.b if isinstance(jumps, TwoPoint) else 0.0

    times = np.full(size, float(horizon))
    censored = np.ones(size, dtype=bool)
    live = np.arange(size)
    x = np.full(size, w.x0, dtype=float)
    clock = np.zeros(size)
    while live.size:
        rest = horizon - clock[live]
        gap = _draw_renewals(spec, rng, live.size)
        span = np.minimum(gap, rest)
        xl = x[live]
        xr = xl + w.mu * span + sig * np.sqrt(span) * rng.standard_normal(live.size)
        logp = -2 * (big_s - xl) * (big_s - xr) / (w.sigma2 * span)
        hit = (xr >= big_s) | (np.log(rng.random(live.size)) < logp)
        if np.any(hit):
            h = np.flatnonzero(hit)
            where = _locate(xl[h], xr[h], span[h], logp[h], big_s, w.sigma2, rng)
            idx = live[h]
            times[idx] = clock[idx] + np.clip(where, 0.0, span[h])
            censored[idx] = False
        go = ~hit & (gap < rest)
        idx = live[go]
        clock[idx] += span[go]
        up = rng.random(idx.size) < jumps.eta
        x[idx] = xr[go] + np.where(up, jumps.a, -down)
        over = x[idx] >= big_s
        times[idx[over]] = clock[idx[over]]
        censored[idx[over]] = False
        live = idx[~over]
    return times, censored


def sample_fct(spec: ProcessSpec, rng: np.random.Generator, horizon: float) -> FctSample:
    """One exact draw of min(T, horizon) with its censoring flag."""
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    t, c = _simulate_block(spec, rng, 1, horizon)
    return FctSample(float(t[0]), bool(c[0]))


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("FCT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"FCT_THREADS must be an integer, got {env!r}") from exc
    return cap if default is None else max(1, min(cap, default))


def simulate_batch(spec: ProcessSpec, cfg: SimConfig, workers: int | None = None) -> FctSamples:
    """``cfg.n_samples`` independent draws.

    Sample ``i`` lives in block ``i // stream_stride``, and each block owns a
    substream keyed by ``(seed, block)``, so results do not depend on the
    number of worker threads.
    """
    n, stride = int(cfg.n_samples), int(cfg.stream_stride)
    blocks = [(k, min(stride, n - k * stride)) for k in range((n + stride - 1) // stride)]

    def run(block):
        k, size = block
        return _simulate_block(spec, substream(cfg.seed, k), size, cfg.horizon)

    workers = worker_count(workers)
    if workers == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    times = np.concatenate([p[0] for p in parts])
    censored = np.concatenate([p[1] for p in parts])
    return FctSamples(times, censored, float(cfg.horizon))


def simulate_positions(spec: ProcessSpec, t: float, n: int, seed: int = 0) -> np.ndarray:
    """Draws of X(t) with no boundary, for moment checks."""
    rng = substream(seed, 0)
    w = spec.wiener
    jumps = spec.jumps
    down = jumps.b if isinstance(jumps, TwoPoint) else 0.0
    if spec.lam == 0 or t == 0:
        counts = np.zeros(n, dtype=np.int64)
    elif isinstance(spec.renewals, Erlang):
        # N(t) >= k iff Poisson(lam t) >= k * shape
        counts = rng.poisson(spec.lam * t, n) // spec.renewals.n
    else:
        counts = rng.poisson(spec.lam * t, n)
    ups = rng.binomial(counts, jumps.eta)
    pos = w.x0 + w.mu * t + w.sigma * math.sqrt(t) * rng.standard_normal(n)
    return pos + jumps.a * ups - down * (counts - ups)


def _level_time(mu, s2, d, level):
    limit = 1.0 if mu >= 0 else math.exp(2 * mu * d / s2)
    t = max(d / abs(mu), 1.0) if mu != 0 else 1.0
    while _wiener_fct_cdf(mu, s2, d, t) < level * limit and t < 1e8:
        t *= 1.1
    return t


def default_horizon(spec: ProcessSpec, level: float = 0.999, factor: float = 2.0) -> float:
    """Censoring horizon: ``factor`` times the later of two proxy times at which
    a Wiener first-crossing cdf reaches ``level`` of its limit.

    One proxy is the jump-free Wiener part, the other a Wiener process with the
    mean and variance per unit time of X.
    """
    w = spec.wiener
    d = spec.distance
    mean1, var1 = process_moments(spec, 1.0)
    matched = _level_time(mean1 - w.x0, var1, d, level)
    plain = _level_time(w.mu, w.sigma2, d, level)
    return factor * max(matched, plain)


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def _columns(samples):
    if isinstance(samples, FctSamples):
        return samples.times, samples.censored
    samples = list(samples)
    return (
        np.array([s.time for s in samples], dtype=float),
        np.array([s.censored for s in samples], dtype=bool),
    )


def epanechnikov_kde(samples, grid, bandwidth="auto") -> DensityEstimate:
    """Kernel estimate of the (possibly defective) crossing-time density."""
    times, censored = _columns(samples)
    grid = np.asarray(grid, dtype=float)
    kde = EpanechnikovKDE(bandwidth=bandwidth).fit(times, censored)
    return DensityEstimate(grid, kde.predict(grid), kde.bandwidth_, kde.n_effective_, kde.n_total_)


def kaplan_meier(samples) -> CdfEstimate:
    times, censored = _columns(samples)
    if times.size == 0:
        raise ValueError("need at least one sample")
    km = KaplanMeier().fit(times, censored)
    return CdfEstimate(km.event_times_, km.cdf_, km.n_total_)


class ClosenessError(RuntimeError):
    def __init__(self, attained):
        super().__init__(f"estimated density mass {attained:.6f} never reaches 0.99 on the grid")
        self.attained = attained


def closeness_measure(estimate: DensityEstimate, bound: BoundCurve, h: float, level: float = 0.99) -> float:
    """h-weighted gap between estimate and bound up to the first multiple of h
    at which the accumulated estimate reaches ``level``."""
    if not h > 0:
        raise ValueError("h must be > 0")
    top = min(estimate.grid[-1], bound.times[-1])
    j = np.arange(1, int(math.floor(top / h + 1e-9)) + 1)
    pts = j * h
    est = np.interp(pts, estimate.grid, estimate.values)
    if not np.allclose(np.interp(pts, estimate.grid, estimate.grid), pts, atol=1e-9 * max(1.0, top)):
        raise ValueError("estimate grid does not contain the multiples of h")
    low = bound.at(pts)
    mass = h * np.cumsum(est)
    reached = np.flatnonzero(mass >= level)
    if reached.size == 0:
        raise ClosenessError(float(mass[-1]) if mass.size else 0.0)
    n = reached[0] + 1
    return float(h * np.sum(est[:n] - low[:n]))


def kde_standard_error(density, n_total, bandwidth):
    """sqrt(f R(K) / (n h)) at density level ``f``; pass a reference density to
    get the error under that hypothesis rather than at the estimate."""
    density = np.maximum(np.asarray(density, dtype=float), 0.0)
    return np.sqrt(density * 0.6 / (n_total * bandwidth))


def cdf_standard_error(values, n_total):
    values = np.asarray(values, dtype=float)
    return np.sqrt(values * (1 - values) / n_total)
