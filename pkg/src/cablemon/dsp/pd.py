"""Per-window partial-discharge features from a segmented capture."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..signals import PdCapture, VoltageReference
from .phase import N_PHASE_BINS, phase_resolve
from .pulses import K_CAL_PC_PER_MV, PulseFeature, detect_capture
from .rate import estimate_repetition_rate
from .wavelet import denoise_capture, noise_sigma

DETECT_SIGMA_FACTOR = 1.75
DETECT_FLOOR_MV = 5.0


@dataclass(frozen=True)
class PdFeatureSet:
    window: tuple[float, float]
    max_charge_pc: float
    mean_charge_pc: float
    rate_pps: float
    phase_histogram: tuple[int, ...]
    pulse_count: int


def extract_pulses(
    capture: PdCapture,
    *,
    levels: int = 5,
    k_cal: float = K_CAL_PC_PER_MV,
    sigma_factor: float = DETECT_SIGMA_FACTOR,
    floor_mv: float = DETECT_FLOOR_MV,
) -> list[PulseFeature]:
    """Denoise, then detect with a noise-scaled threshold.

    The threshold is ``max(floor_mv, sigma_factor * sigma)`` where sigma is the
    raw capture's robust noise level, so the false-alarm rate does not depend
    on how strong the noise is. Amplitudes are read from the raw segments.
    """
    if len(capture) == 0:
        return []
    denoised = denoise_capture(capture, levels)
    threshold = max(floor_mv, sigma_factor * noise_sigma(capture.segments))
    return detect_capture(denoised, threshold, k_cal=k_cal, reference=capture)


def pd_feature_set(
    window_pulses: Sequence[PulseFeature],
    window: tuple[float, float],
    rate_pulses: Sequence[PulseFeature] | None = None,
    rate_window_s: float | None = None,
    ref: VoltageReference | None = None,
) -> PdFeatureSet:
    """Charge statistics over ``window``; rate over an optional longer trailing history."""
    charges = np.array([p.charge_pc for p in window_pulses])
    if rate_pulses is None:
        rate_pulses, rate_window_s = window_pulses, window[1] - window[0]
    rate = estimate_repetition_rate(list(rate_pulses), rate_window_s)
    if ref is not None and len(window_pulses):
        _, hist = phase_resolve(list(window_pulses), ref)
        hist = tuple(int(v) for v in hist)
    else:
        hist = (0,) * N_PHASE_BINS
    return PdFeatureSet(
        window=window,
        max_charge_pc=float(charges.max()) if charges.size else 0.0,
        mean_charge_pc=float(charges.mean()) if charges.size else 0.0,
        rate_pps=rate,
        phase_histogram=hist,
        pulse_count=int(charges.size),
    )
