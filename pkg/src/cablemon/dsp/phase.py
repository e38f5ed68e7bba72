"""Phase-resolved PD: pulse angles against the power-frequency voltage."""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np

from ..signals import VoltageReference
from .pulses import PulseFeature

N_PHASE_BINS = 36


def phase_of(t: float, ref: VoltageReference) -> float:
    cycles = (t - ref.zero_crossing_time) * ref.frequency_hz
    frac = cycles - math.floor(cycles)
    deg = 360.0 * frac
    return 0.0 if deg >= 360.0 else deg


def phase_histogram(phases: Sequence[float], n_bins: int = N_PHASE_BINS) -> np.ndarray:
    idx = np.floor(np.asarray(phases, dtype=np.float64) / (360.0 / n_bins)).astype(np.int64)
    return np.bincount(np.clip(idx, 0, n_bins - 1), minlength=n_bins)


def phase_resolve(
    pulses: Sequence[PulseFeature], ref: VoltageReference
) -> tuple[list[PulseFeature], np.ndarray]:
    """Attach ``phase_deg`` to every pulse and return the 36-bin (10 degree) histogram."""
    resolved = [dataclasses.replace(p, phase_deg=phase_of(p.time, ref)) for p in pulses]
    return resolved, phase_histogram([p.phase_deg for p in resolved])
