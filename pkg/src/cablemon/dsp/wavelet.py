"""Daubechies-4 wavelet denoising with the soft universal threshold."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..signals import PdCapture, RawWaveform

# db4 scaling filter (8 taps, 4 vanishing moments)
DB4_LO = np.array(
    [
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ]
)
DB4_HI = np.array([(-1) ** j * DB4_LO[len(DB4_LO) - 1 - j] for j in range(len(DB4_LO))])

MAD_TO_SIGMA = 0.6745


def wavedec(x: np.ndarray, levels: int) -> list[np.ndarray]:
    """Multi-level periodized DWT of every row. Returns ``[a_L, d_L, ..., d_1]``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] % (2**levels):
        raise ValueError("row length must be divisible by 2**levels")
    details = []
    a = x
    for _ in range(levels):
        a, d = kernels.dwt_step(a, DB4_LO, DB4_HI)
        details.append(d)
    return [a] + details[::-1]


def waverec(coeffs: list[np.ndarray]) -> np.ndarray:
    a = coeffs[0]
    for d in coeffs[1:]:
        a = kernels.idwt_step(a, d, DB4_LO, DB4_HI)
    return a


def soft_threshold(c: np.ndarray, lam) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)


def universal_threshold(d1: np.ndarray, n: int) -> np.ndarray:
    """Per-row sigma_hat * sqrt(2 ln n), sigma_hat from the finest-scale MAD."""
    sigma = np.median(np.abs(np.atleast_2d(d1)), axis=1) / MAD_TO_SIGMA
    return sigma * math.sqrt(2.0 * math.log(n))


def denoise_rows(x: np.ndarray, levels: int) -> np.ndarray:
    """Denoise each row independently; output has the input's shape.

    Rows whose length is not a multiple of ``2**levels`` are zero-padded for
    the transform and cropped afterwards, which keeps output energy bounded
    by input energy.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[1]
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if n < 2**levels:
        raise ValueError(f"signal too short: {n} samples < 2**{levels}")
    block = 2**levels
    padded_n = -(-n // block) * block
    work = x if padded_n == n else np.pad(x, ((0, 0), (0, padded_n - n)))
    coeffs = wavedec(work, levels)
    lam = universal_threshold(coeffs[-1], n)[:, None]
    coeffs = [coeffs[0]] + [soft_threshold(d, lam) for d in coeffs[1:]]
    return waverec(coeffs)[:, :n]


def denoise_wavelet(w: RawWaveform, levels: int = 5) -> RawWaveform:
    out = denoise_rows(w.samples[None, :], levels)[0]
    return RawWaveform(w.sample_rate_hz, w.start_time, out)


def denoise_capture(capture: PdCapture, levels: int = 5) -> PdCapture:
    """Denoise every acquisition segment (each gets its own noise estimate)."""
    if len(capture) == 0:
        return capture
    return capture.with_segments(denoise_rows(capture.segments, levels))


def noise_sigma(x: np.ndarray) -> float:
    """Robust noise level of the rows of ``x`` from finest-scale detail coefficients."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.size == 0:
        return 0.0
    work = x if x.shape[1] % 2 == 0 else x[:, :-1]
    _, d1 = kernels.dwt_step(work, DB4_LO, DB4_HI)
    return float(np.median(np.abs(d1)) / MAD_TO_SIGMA)
