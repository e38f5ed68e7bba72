"""Pulse repetition rate from the autocorrelation of an occurrence train."""

from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np

from .. import kernels
from .pulses import PulseFeature

BIN_S = 1e-3


def _times(pulses: Iterable[PulseFeature | float]) -> np.ndarray:
    return np.sort(np.array([p.time if isinstance(p, PulseFeature) else float(p) for p in pulses]))


def estimate_repetition_rate(
    pulses: Iterable[PulseFeature | float], window_s: float, bin_s: float = BIN_S
) -> float:
    """Repetition rate in pulses per second.

    Pulse times are binned into ``bin_s`` occurrence bins. The first dominant
    peak of the (smoothed) autocorrelation gives the period; its lag is refined
    to the centroid of the pair counts in that lobe. Fewer than three pulses
    fall back to count / window.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    t = _times(pulses)
    n = t.shape[0]
    if n == 0:
        return 0.0
    if n < 3:
        return n / window_s
    span = t[-1] - t[0]
    nbins = int(math.floor(max(window_s, span) / bin_s)) + 1
    idx = np.floor((t - t[0]) / bin_s + 1e-9).astype(np.int64)
    train = np.bincount(idx, minlength=nbins).astype(np.float64)
    acf = kernels.occurrence_acf(train, nbins - 1)
    pairs = acf * (nbins - np.arange(acf.shape[0]))
    if pairs.shape[0] < 3 or pairs[1:].sum() == 0:
        return n / window_s

    gaps = np.diff(t)
    scale = max(1.0, 0.15 * float(np.median(gaps[gaps > 0]) if np.any(gaps > 0) else bin_s) / bin_s)
    half = int(math.ceil(3 * scale))
    kern = np.exp(-0.5 * (np.arange(-half, half + 1) / scale) ** 2)
    off_zero = pairs.copy()
    off_zero[0] = 0.0
    smooth = np.convolve(off_zero, kern)[half : half + off_zero.shape[0]]
    top = smooth.max()
    if top <= 0:
        return n / window_s
    peak = None
    for k in range(1, smooth.shape[0] - 1):
        if smooth[k] >= 0.5 * top and smooth[k] >= smooth[k - 1] and smooth[k] >= smooth[k + 1]:
            peak = k
            break
    if peak is None:
        peak = int(np.argmax(smooth))

    lag = float(peak)
    lags = np.arange(pairs.shape[0], dtype=np.float64)
    for _ in range(3):
        lo, hi = 0.5 * lag, 1.5 * lag
        sel = (lags >= lo) & (lags <= hi) & (lags > 0)
        weight = pairs[sel].sum()
        if weight <= 0:
            break
        lag = float((lags[sel] * pairs[sel]).sum() / weight)
    period = lag * bin_s
    if period <= 0:
        return n / window_s
    return 1.0 / period
