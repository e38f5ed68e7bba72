"""PD pulse detection and apparent-charge calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..signals import PdCapture, RawWaveform

K_CAL_PC_PER_MV = 12.0
MIN_SEPARATION_S = 200e-9


@dataclass(frozen=True)
class PulseFeature:
    time: float
    amplitude_mv: float
    width_ns: float
    charge_pc: float
    phase_deg: float = 0.0


def charge_from_amplitude(amplitude_mv: float, k_cal: float = K_CAL_PC_PER_MV) -> float:
    return k_cal * amplitude_mv


def _detect_block(
    samples: np.ndarray,
    measure: np.ndarray,
    fs: float,
    t0: float,
    threshold_mv: float,
    k_cal: float,
    min_separation_s: float,
) -> list[PulseFeature]:
    min_dist = max(1, int(round(min_separation_s * fs)))
    peaks = kernels.find_peaks(samples, threshold_mv, min_dist)
    if len(peaks) == 0:
        return []
    if measure is not samples:
        # re-centre on the measurement trace: denoising can shift a peak by a sample
        n = measure.shape[0]
        peaks = np.array(
            [max(0, p - 1) + int(np.argmax(measure[max(0, p - 1) : min(n, p + 2)])) for p in peaks],
            dtype=np.int64,
        )
    lefts, rights = kernels.half_widths(measure, peaks)
    out = []
    for p, lft, rgt in zip(peaks, lefts, rights):
        amp = float(measure[p])
        width_ns = max(rgt - lft, 1.0) / fs * 1e9
        out.append(PulseFeature(t0 + int(p) / fs, amp, width_ns, charge_from_amplitude(amp, k_cal)))
    return out


def detect_pulses(
    w: RawWaveform,
    threshold_mv: float,
    *,
    k_cal: float = K_CAL_PC_PER_MV,
    min_separation_s: float = MIN_SEPARATION_S,
    reference: RawWaveform | None = None,
) -> list[PulseFeature]:
    """Local maxima above ``threshold_mv`` with a minimum separation.

    Width is measured at half amplitude. When ``reference`` (typically the raw
    trace that ``w`` was denoised from) is given, peaks are located on ``w`` but
    amplitude and width are read from ``reference``.
    """
    if threshold_mv <= 0:
        raise ValueError("threshold_mv must be positive")
    measure = w.samples if reference is None else reference.samples
    if measure.shape != w.samples.shape:
        raise ValueError("reference must match the waveform length")
    return _detect_block(
        w.samples, measure, w.sample_rate_hz, w.start_time, threshold_mv, k_cal, min_separation_s
    )


def detect_capture(
    capture: PdCapture,
    threshold_mv: float,
    *,
    k_cal: float = K_CAL_PC_PER_MV,
    min_separation_s: float = MIN_SEPARATION_S,
    reference: PdCapture | None = None,
) -> list[PulseFeature]:
    """:func:`detect_pulses` applied to every segment of a capture, time-ordered."""
    if threshold_mv <= 0:
        raise ValueError("threshold_mv must be positive")
    fs = capture.sample_rate_hz
    out: list[PulseFeature] = []
    for i in range(len(capture)):
        seg = capture.segments[i]
        measure = seg if reference is None else reference.segments[i]
        t0 = capture.start_time + capture.segment_starts[i] / fs
        out.extend(_detect_block(seg, measure, fs, t0, threshold_mv, k_cal, min_separation_s))
    return out
