"""Records and alerts produced by an IMU."""

from __future__ import annotations

import math
import uuid as uuidlib
from dataclasses import asdict, dataclass, field
from enum import IntEnum

# namespace for deterministic alert/event ids
UUID_NAMESPACE = uuidlib.UUID("6f1d3c52-8a0e-5b7c-9d41-2e6a5f0c7b13")


class FsmLevel(IntEnum):
    NORMAL = 0
    ATTENTION = 1
    SEVERE = 2


class Quality(IntEnum):
    """Bit flags carried in register 7."""

    SATURATED = 0x01
    PD_UNAVAILABLE = 0x02
    DTS_UNAVAILABLE = 0x04
    CURRENT_UNAVAILABLE = 0x08
    VIBRATION_UNAVAILABLE = 0x10
    SPURIOUS_REJECTED = 0x20


@dataclass(frozen=True)
class FeatureRecord:
    imu_id: str
    seq: int
    time: float
    max_charge_pc: float = 0.0
    rate_pps: float = 0.0
    phase_histogram: tuple[int, ...] = field(default=(0,) * 36)
    max_temp_c: float = 0.0
    max_gradient_c_per_m: float = 0.0
    max_rise_rate_c_per_min: float = 0.0
    current_a: float = 0.0
    vibration_rms: float = 0.0
    fsm_state: FsmLevel = FsmLevel.NORMAL
    quality: int = 0

    def __post_init__(self) -> None:
        for name in (
            "time",
            "max_charge_pc",
            "rate_pps",
            "max_temp_c",
            "max_gradient_c_per_m",
            "max_rise_rate_c_per_min",
            "current_a",
            "vibration_rms",
        ):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def metrics(self) -> dict[str, float]:
        """Values under the rule-language metric names."""
        return {
            "pd_magnitude_pc": self.max_charge_pc,
            "pd_rate_pps": self.rate_pps,
            "temp_c": self.max_temp_c,
            "temp_rise_c_per_min": self.max_rise_rate_c_per_min,
            "temp_gradient_c_per_m": self.max_gradient_c_per_m,
            "current_a": self.current_a,
            "vibration_rms": self.vibration_rms,
        }

    def to_json(self) -> dict:
        d = asdict(self)
        d["fsm_state"] = self.fsm_state.name
        d["phase_histogram"] = list(self.phase_histogram)
        return d


@dataclass(frozen=True)
class Alert:
    imu_id: str
    time: float
    entered_state: FsmLevel
    metric: str
    value: float
    threshold: float
    seq: int
    uuid: str

    @staticmethod
    def make(imu_id: str, time: float, entered: FsmLevel, metric: str, value: float, threshold: float, seq: int) -> "Alert":
        key = uuidlib.uuid5(UUID_NAMESPACE, f"alert/{imu_id}/{seq}/{entered.name}")
        return Alert(imu_id, time, entered, metric, value, threshold, seq, str(key))

    def to_json(self) -> dict:
        d = asdict(self)
        d["entered_state"] = self.entered_state.name
        return d

    @staticmethod
    def from_json(d: dict) -> "Alert":
        return Alert(
            imu_id=str(d["imu_id"]),
            time=float(d["time"]),
            entered_state=FsmLevel[d["entered_state"]],
            metric=str(d["metric"]),
            value=float(d["value"]),
            threshold=float(d["threshold"]),
            seq=int(d["seq"]),
            uuid=str(d["uuid"]),
        )
