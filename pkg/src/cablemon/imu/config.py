"""IMU configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Any

RS485_BAUD = 115_200  # field bus line rate; recorded, not emulated


@dataclass(frozen=True)
class ImuConfig:
    id: str
    position_m: float = 0.0
    circuit_id: str = "1"
    zone_m: tuple[float, float] = (0.0, 0.0)
    sampling_hz: float = 1000.0
    severe_charge_pc: float = 1000.0
    severe_gradient_c_per_m: float = 10.0
    attention_charge_pc: float = 500.0
    temp_alarm_c: float = 80.0
    rise_alarm_c_per_min: float = 5.0
    enter_debounce: int = 3
    exit_debounce: int = 10
    unit_id: int = 1
    tick_s: float = 1.0
    ring_size: int = 3600
    rate_window_s: float = 5.0
    thermal_window_s: float = 60.0
    min_rise_span_s: float = 30.0
    wavelet_levels: int = 5
    k_cal_pc_per_mv: float = 12.0
    verdet_alpha: float = 7e-5
    verdet_t0_c: float = 25.0
    thermal_k_per_a2: float = 0.0
    fusion_q: float = 0.05
    fusion_r: float = 1.0
    alert_queue: int = 256

    def __post_init__(self) -> None:
        if not 10 <= self.sampling_hz <= 1000:
            raise ValueError("sampling_hz must lie in [10, 1000]")
        if self.enter_debounce < 1 or self.exit_debounce < 1:
            raise ValueError("debounce counts must be >= 1")
        if self.ring_size < 1:
            raise ValueError("ring_size must be >= 1")

    def with_overrides(self, overrides: dict[str, Any]) -> "ImuConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown IMU setting(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)
