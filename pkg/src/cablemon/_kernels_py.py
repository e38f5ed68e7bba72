"""Pure numpy implementations of the hot loops.

Same signatures and results as the compiled ``_kernels`` extension. Used when
the extension is not built or when ``CABLEMON_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np


def dwt_step(x, lo, hi):
    """One periodized analysis step over every row of a 2-D array.

    Index alignment matches PyWavelets' ``periodization`` mode.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    m, n = x.shape
    half = n // 2
    base = 2 * np.arange(half)
    off = lo.shape[0] // 2 - 1
    a = np.zeros((m, half))
    d = np.zeros((m, half))
    for j in range(lo.shape[0]):
        cols = x[:, (base + j - off) % n]
        a += lo[j] * cols
        d += hi[j] * cols
    return a, d


def idwt_step(a, d, lo, hi):
    """Inverse of :func:`dwt_step` (transpose of the orthogonal analysis)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    m, half = a.shape
    n = 2 * half
    base = 2 * np.arange(half)
    off = lo.shape[0] // 2 - 1
    x = np.zeros((m, n))
    for j in range(lo.shape[0]):
        idx = (base + j - off) % n
        # idx may repeat when n < filter length, so accumulate unbuffered
        contrib = lo[j] * a + hi[j] * d
        for r in range(m):
            np.add.at(x[r], idx, contrib[r])
    return x


def find_peaks(x, threshold, min_distance):
    """Local maxima above ``threshold``; taller peaks suppress neighbours closer than ``min_distance``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0] = True
    left[1:] = x[1:] > x[:-1]
    right[-1] = True
    right[:-1] = x[:-1] >= x[1:]
    cand = np.flatnonzero(left & right & (x > threshold))
    if cand.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = cand[np.argsort(-x[cand], kind="stable")]
    keep = np.ones(cand.size, dtype=bool)
    pos = {int(c): k for k, c in enumerate(cand)}
    removed = set()
    for c in order:
        c = int(c)
        if c in removed:
            continue
        lo_i = np.searchsorted(cand, c - min_distance + 1)
        hi_i = np.searchsorted(cand, c + min_distance, side="left")
        for k in range(lo_i, hi_i):
            other = int(cand[k])
            if other != c and other not in removed:
                removed.add(other)
                keep[pos[other]] = False
    return cand[keep].astype(np.int64)


def half_widths(x, peaks):
    """Interpolated left/right half-height crossing positions (in samples) for each peak."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    lefts = np.empty(len(peaks))
    rights = np.empty(len(peaks))
    for k, p in enumerate(peaks):
        p = int(p)
        half = 0.5 * x[p]
        i = p
        while i > 0 and x[i - 1] > half:
            i -= 1
        if i == 0 and x[0] > half:
            lefts[k] = 0.0
        else:
            lo_v, hi_v = x[i - 1], x[i]
            lefts[k] = (i - 1) + (half - lo_v) / (hi_v - lo_v)
        i = p
        while i < n - 1 and x[i + 1] > half:
            i += 1
        if i == n - 1 and x[n - 1] > half:
            rights[k] = float(n - 1)
        else:
            hi_v, lo_v = x[i], x[i + 1]
            rights[k] = i + (hi_v - half) / (hi_v - lo_v)
    return lefts, rights


def occurrence_acf(train, max_lag):
    """Unbiased autocorrelation of an occurrence train for lags 0..max_lag."""
    t = np.asarray(train, dtype=np.float64)
    n = t.shape[0]
    max_lag = min(int(max_lag), n - 1)
    if max_lag < 0:
        return np.zeros(0)
    full = np.correlate(t, t, mode="full")[n - 1 : n + max_lag]
    return full / (n - np.arange(max_lag + 1))


def kalman_step(est, var, z, pred, q, r, gate):
    """Vectorized scalar predict/update with innovation gating."""
    est = np.asarray(est, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    p_pred = var + q
    innov = z - pred
    s = p_pred + r
    flag = np.abs(innov) > gate * np.sqrt(s)
    gain = p_pred / s
    new_est = np.where(flag, pred, pred + gain * innov)
    new_var = np.where(flag, p_pred, (1.0 - gain) * p_pred)
    return new_est, new_var, innov, flag
