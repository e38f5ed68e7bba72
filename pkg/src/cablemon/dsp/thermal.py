"""Thermal features from a time-ordered run of DTS frames."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..signals import TemperatureFrame


@dataclass(frozen=True)
class ThermalFeatureSet:
    max_temp_c: float
    max_gradient_c_per_m: float
    max_rise_rate_c_per_min: float
    hotspot_position_m: float
    gradient_position_m: float
    rise_position_m: float


def thermal_features(frames: Sequence[TemperatureFrame]) -> ThermalFeatureSet:
    """Hottest point, steepest adjacent-point gradient and fastest rise.

    Temperature and gradient come from the newest frame. Rise rate per point is
    (newest - oldest) over the elapsed minutes; only heating counts, so cooling
    never reads as a rise.
    """
    if not frames:
        raise ValueError("need at least one frame")
    first, last = frames[0], frames[-1]
    shape = first.temps_c.shape
    for f in frames:
        if f.temps_c.shape != shape or f.spacing_m != first.spacing_m or f.origin_m != first.origin_m:
            raise ValueError("frames must share spacing, origin and length")
    if shape[0] == 0:
        raise ValueError("frames are empty")

    temps = last.temps_c
    i_hot = int(np.argmax(temps))
    if temps.shape[0] > 1:
        grad = np.abs(np.diff(temps)) / last.spacing_m
        i_grad = int(np.argmax(grad))
        max_grad = float(grad[i_grad])
        grad_pos = last.position_of(i_grad) + 0.5 * last.spacing_m
    else:
        max_grad, grad_pos = 0.0, last.position_of(0)

    minutes = (last.time - first.time) / 60.0
    if len(frames) > 1 and minutes > 0:
        rise = np.maximum(last.temps_c - first.temps_c, 0.0) / minutes
        i_rise = int(np.argmax(rise))
        max_rise = float(rise[i_rise])
    else:
        i_rise, max_rise = i_hot, 0.0

    return ThermalFeatureSet(
        max_temp_c=float(temps[i_hot]),
        max_gradient_c_per_m=max_grad,
        max_rise_rate_c_per_min=max_rise,
        hotspot_position_m=last.position_of(i_hot),
        gradient_position_m=grad_pos,
        rise_position_m=last.position_of(i_rise),
    )
