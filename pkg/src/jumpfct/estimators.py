"""Scikit-learn style estimators for censored crossing-time samples."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

# normal-reference constant for the Epanechnikov kernel
_EPANECHNIKOV_RULE = 2.345


def _fit_inputs(times, censored):
    times = check_array(np.asarray(times, dtype=float).reshape(-1, 1)).ravel()
    if censored is None:
        censored = np.zeros(times.size, dtype=bool)
    censored = np.asarray(censored, dtype=bool).ravel()
    if censored.shape != times.shape:
        raise ValueError("times and censored must have the same length")
    if np.any(times < 0):
        raise ValueError("crossing times must be >= 0")
    return times, censored


def reference_bandwidth(times) -> float:
    """2.345 * min(sd, IQR / 1.349) * n^(-1/5)."""
    times = np.asarray(times, dtype=float)
    n = times.size
    sd = np.std(times, ddof=1) if n > 1 else 0.0
    q75, q25 = np.percentile(times, [75, 25]) if n > 1 else (0.0, 0.0)
    spread = min(sd, (q75 - q25) / 1.349) or sd
    if not spread > 0:
        spread = max(abs(float(times.mean())), 1.0) * 1e-3
    return float(_EPANECHNIKOV_RULE * spread * n ** (-0.2))


class EpanechnikovKDE(BaseEstimator):
    """Kernel density of the uncensored times, normalised by the full sample size.

    The estimate therefore integrates to the uncensored fraction, matching a
    density that may be defective.
    """

    def __init__(self, bandwidth="auto"):
        self.bandwidth = bandwidth

    def fit(self, times, censored=None):
        times, censored = _fit_inputs(times, censored)
        events = np.sort(times[~censored])
        if events.size == 0:
            raise ValueError("no uncensored samples to estimate a density from")
        if self.bandwidth == "auto" or self.bandwidth is None:
            h = reference_bandwidth(events)
        else:
            h = float(self.bandwidth)
            if not h > 0:
                raise ValueError("bandwidth must be > 0")
        # shift to the sample mean before forming power sums
        self.centre_ = float(events.mean())
        z = events - self.centre_
        self.events_ = events
        self.sum1_ = np.concatenate([[0.0], np.cumsum(z)])
        self.sum2_ = np.concatenate([[0.0], np.cumsum(z * z)])
        self.bandwidth_ = h
        self.n_effective_ = int(events.size)
        self.n_total_ = int(times.size)
        return self

    def predict(self, t):
        check_is_fitted(self, "events_")
        t = np.asarray(t, dtype=float)
        h = self.bandwidth_
        lo = np.searchsorted(self.events_, t - h, side="left")
        hi = np.searchsorted(self.events_, t + h, side="right")
        count = hi - lo
        tc = t - self.centre_
        s1 = self.sum1_[hi] - self.sum1_[lo]
        s2 = self.sum2_[hi] - self.sum2_[lo]
        sq = count * tc * tc - 2 * tc * s1 + s2
        total = 0.75 * (count - sq / (h * h))
        return np.maximum(total, 0.0) / (self.n_total_ * h)


class KaplanMeier(BaseEstimator):
    """Product-limit estimate of the crossing-time cdf, 1 - S(t)."""

    def fit(self, times, censored=None):
        times, censored = _fit_inputs(times, censored)
        if times.size == 0:
            raise ValueError("need at least one sample")
        order = np.argsort(times, kind="stable")
        t = times[order]
        ev = ~censored[order]
        uniq, first = np.unique(t, return_index=True)
        deaths = np.add.reduceat(ev.astype(np.int64), first)
        at_risk = t.size - first
        keep = deaths > 0
        r, d = at_risk[keep], deaths[keep]
        # prod (r_i - d_i)/r_i = (r_k - d_k)/r_1 * prod_{i<k} (r_i - d_i)/r_{i+1};
        # the trailing factors are exactly 1 between censorings, so with no
        # censoring the cdf comes out as the exact empirical fractions
        links = np.cumprod(np.concatenate([[1.0], (r[:-1] - d[:-1]) / r[1:]]))
        start = float(r[0]) if r.size else 1.0
        self.event_times_ = uniq[keep]
        self.cdf_ = (start - (r - d) * links) / start
        self.n_total_ = int(t.size)
        return self

    def predict(self, t):
        check_is_fitted(self, "cdf_")
        idx = np.searchsorted(self.event_times_, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, self.cdf_[np.maximum(idx - 1, 0)], 0.0)
