"""Exact draws from x^a (1-x)^b restricted to an interval.

That is Beta(a + 1, b + 1) truncated to ``(lo, hi)``. Two regimes:

1. the mean lies inside the interval: draw from the untruncated beta and
   reject until the draw lands inside;
2. otherwise: uniform proposals on the interval with the envelope set by
   the largest density value on it.

Regime 2 degrades when the density falls off steeply across a wide interval;
after a bounded number of uniform proposals it switches to an exponential
envelope tangent to the (concave) log-density, which stays exact.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["log_kernel", "sample_truncated_beta", "truncated_beta_cdf"]

MAX_NAIVE_REJECTIONS = 1000
UNIFORM_BATCH = 512
MAX_UNIFORM_PROPOSALS = 1 << 15


def log_kernel(x, a: float, b: float):
    """Unnormalized log-density a log x + b log(1 - x), with 0 log 0 = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, a * np.log(x), 0.0) + np.where(b > 0, b * np.log1p(-x), 0.0)
    return out


def _mode(a: float, b: float) -> float | None:
    if a + b == 0:
        return None  # flat
    return a / (a + b)


def _log_envelope(a: float, b: float, lo: float, hi: float) -> float:
    mode = _mode(a, b)
    cands = [lo, hi]
    if mode is not None and lo < mode < hi:
        cands.append(mode)
    return float(np.max(log_kernel(np.array(cands), a, b)))


def _uniform_envelope(a, b, lo, hi, rng, max_proposals):
    log_m = _log_envelope(a, b, lo, hi)
    drawn = 0
    while drawn < max_proposals:
        u = rng.uniform(lo, hi, size=UNIFORM_BATCH)
        log_acc = log_kernel(u, a, b) - log_m
        v = rng.random(UNIFORM_BATCH)
        hit = np.flatnonzero(np.log(v) < log_acc)
        if hit.size:
            return float(u[hit[0]])
        drawn += UNIFORM_BATCH
    return None


def _tangent_envelope(a, b, lo, hi, rng):
    """Exponential envelope tangent to the log-density at the interval's peak end.

    Only valid when the density is monotone on ``(lo, hi)``.
    """
    mode = _mode(a, b)
    # density is monotone on the interval here; anchor at the end where it peaks
    anchor = hi if mode is None or mode >= hi else lo
    slope = (a / anchor if a > 0 else 0.0) - (b / (1.0 - anchor) if b > 0 else 0.0)
    log_anchor = float(log_kernel(anchor, a, b))
    width = hi - lo
    while True:
        w = rng.random()
        if abs(slope) * width < 1e-12:
            x = lo + w * width
        else:
            # inverse CDF of exp(slope * (x - anchor)) on (lo, hi)
            c = slope * width
            if anchor == hi:
                x = hi + math.log1p(w * math.expm1(-c)) / slope
            else:
                x = lo + math.log1p(w * math.expm1(c)) / slope
        x = min(max(x, lo), hi)
        log_env = log_anchor + slope * (x - anchor)
        if math.log(rng.random()) < float(log_kernel(x, a, b)) - log_env:
            return x


def _clamp_open(x: float, lo: float, hi: float) -> float:
    if x <= lo:
        x = np.nextafter(lo, hi)
    if x >= hi:
        x = np.nextafter(hi, lo)
    return float(x)


def sample_truncated_beta(a, b, lo: float, hi: float, rng: np.random.Generator) -> float:
    """Draw from Beta(a + 1, b + 1) conditioned on ``lo < x < hi``.

    ``a`` and ``b`` are the edge and non-edge counts attached to a density.
    """
    lo, hi = float(lo), float(hi)
    a, b = float(a), float(b)
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
    if a < 0 or b < 0:
        raise ValueError("counts must be non-negative")

    mean = (a + 1.0) / (a + b + 2.0)
    if lo < mean < hi:
        for _ in range(MAX_NAIVE_REJECTIONS):
            x = rng.beta(a + 1.0, b + 1.0)
            if lo < x < hi:
                return float(x)
        x = _uniform_envelope(a, b, lo, hi, rng, MAX_UNIFORM_PROPOSALS)
    else:
        x = _uniform_envelope(a, b, lo, hi, rng, MAX_UNIFORM_PROPOSALS)
    if x is None:
        mode = _mode(a, b)
        if mode is not None and lo < mode < hi:
            # the interval is narrow around the mode, so uniform proposals converge
            while x is None:
                x = _uniform_envelope(a, b, lo, hi, rng, MAX_UNIFORM_PROPOSALS)
        else:
            x = _tangent_envelope(a, b, lo, hi, rng)
    return _clamp_open(x, lo, hi)


def truncated_beta_cdf(x, a: float, b: float, lo: float, hi: float):
    """CDF of the truncated distribution via the regularized incomplete beta."""
    from scipy.special import betainc

    x = np.clip(np.asarray(x, dtype=float), lo, hi)
    flo = betainc(a + 1, b + 1, lo)
    fhi = betainc(a + 1, b + 1, hi)
    return (betainc(a + 1, b + 1, x) - flo) / (fhi - flo)
