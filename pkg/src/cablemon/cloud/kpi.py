"""Circuit-level indicators and load-management recommendations.

The health index, failure probability and remaining-life estimate are
deterministic placeholder formulas. Their coefficients are all in
:class:`KpiConfig` so a deployment can recalibrate without code changes.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field


@dataclass(frozen=True)
class KpiConfig:
    t_alarm_c: float = 80.0
    t_ambient_ref_c: float = 25.0
    load_limit_pct: float = 80.0
    margin_floor_pct: float = 10.0
    target_load_pct: float = 76.0
    pd_charge_full_pc: float = 1000.0
    pd_rate_full_pps: float = 10.0
    pd_weight: float = 0.5
    thermal_weight: float = 0.5
    logistic_slope: float = 0.1
    logistic_mid: float = 50.0
    rul_base_days: float = 3650.0
    health_window_s: float = 86400.0


DEFAULT_KPI = KpiConfig()


class RecommendationKind(str, enum.Enum):
    NONE = "None"
    LOAD_LIMIT = "LoadLimit"
    LOAD_SHED = "LoadShed"


@dataclass(frozen=True)
class Recommendation:
    circuit_id: str
    time: float
    kind: RecommendationKind
    target_load_factor_pct: float | None
    rationale: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "circuit_id": self.circuit_id,
            "time": self.time,
            "kind": self.kind.value,
            "target_load_factor_pct": self.target_load_factor_pct,
            "rationale": dict(self.rationale),
        }


@dataclass(frozen=True)
class KpiSnapshot:
    circuit_id: str
    time: float
    load_factor_pct: float
    thermal_margin_pct: float
    health_index: float
    failure_probability: float
    rul_days: float

    def __post_init__(self):
        if not 0.0 <= self.health_index <= 100.0:
            raise ValueError(f"health index {self.health_index} outside [0, 100]")
        if not 0.0 <= self.failure_probability <= 1.0:
            raise ValueError(f"failure probability {self.failure_probability} outside [0, 1]")
        if self.rul_days < 0:
            raise ValueError("rul_days must be nonnegative")

    def to_json(self) -> dict:
        return {
            "circuit_id": self.circuit_id,
            "time": self.time,
            "load_factor_pct": self.load_factor_pct,
            "thermal_margin_pct": self.thermal_margin_pct,
            "health_index": self.health_index,
            "failure_probability": self.failure_probability,
            "rul_days": self.rul_days,
        }

    @staticmethod
    def from_json(d: Mapping) -> "KpiSnapshot":
        return KpiSnapshot(
            str(d["circuit_id"]),
            float(d["time"]),
            float(d["load_factor_pct"]),
            float(d["thermal_margin_pct"]),
            float(d["health_index"]),
            float(d["failure_probability"]),
            float(d["rul_days"]),
        )


def compute_load_factor(i_rms_a: float, rated_a: float) -> float:
    if not rated_a > 0:
        raise ValueError("rated current must be positive")
    return 100.0 * i_rms_a / rated_a


def compute_thermal_margin(t_hot_c: float, t_alarm_c: float = 80.0, t_ambient_ref_c: float = 25.0) -> float:
    span = t_alarm_c - t_ambient_ref_c
    if not span > 0:
        raise ValueError("alarm temperature must exceed the ambient reference")
    return min(100.0, max(0.0, 100.0 * (t_alarm_c - t_hot_c) / span))


def recommend_load_action(
    load_factor_pct: float,
    thermal_margin_pct: float,
    *,
    circuit_id: str = "",
    time: float = 0.0,
    cfg: KpiConfig = DEFAULT_KPI,
) -> Recommendation:
    if not (math.isfinite(load_factor_pct) and math.isfinite(thermal_margin_pct)):
        raise ValueError("inputs must be finite")
    overloaded = load_factor_pct > cfg.load_limit_pct
    thin_margin = thermal_margin_pct < cfg.margin_floor_pct
    rationale: dict[str, float] = {}
    if overloaded:
        rationale["load_factor_pct"] = load_factor_pct
    if thin_margin:
        rationale["thermal_margin_pct"] = thermal_margin_pct
    if overloaded and thin_margin:
        kind = RecommendationKind.LOAD_SHED
    elif overloaded or thin_margin:
        kind = RecommendationKind.LOAD_LIMIT
    else:
        return Recommendation(circuit_id, time, RecommendationKind.NONE, None)
    return Recommendation(circuit_id, time, kind, cfg.target_load_pct, rationale)


def pd_severity(max_charge_pc: float, rate_pps: float, cfg: KpiConfig = DEFAULT_KPI) -> float:
    charge = min(1.0, max(0.0, max_charge_pc) / cfg.pd_charge_full_pc)
    rate = min(1.0, max(0.0, rate_pps) / cfg.pd_rate_full_pps)
    return 100.0 * charge * rate


def thermal_severity(t_hot_c: float, cfg: KpiConfig = DEFAULT_KPI) -> float:
    frac = (t_hot_c - cfg.t_ambient_ref_c) / (cfg.t_alarm_c - cfg.t_ambient_ref_c)
    return 100.0 * min(1.0, max(0.0, frac))


@dataclass(frozen=True)
class ConditionSample:
    """One observation feeding the health index."""

    time: float
    max_charge_pc: float = 0.0
    rate_pps: float = 0.0
    t_hot_c: float = float("-inf")


def compute_health_index(
    samples: Iterable[ConditionSample], now: float | None = None, cfg: KpiConfig = DEFAULT_KPI
) -> float:
    """100 minus weighted PD and thermal penalties, each taken as its worst over the trailing window.

    The PD penalty pairs each sample's charge with its own rate, so a large
    pulse and an unrelated burst of small ones do not combine.
    """
    samples = list(samples)
    if now is None:
        now = max((s.time for s in samples), default=0.0)
    lo = now - cfg.health_window_s
    s_pd = 0.0
    s_th = 0.0
    for s in samples:
        if not lo <= s.time <= now:
            continue
        s_pd = max(s_pd, pd_severity(s.max_charge_pc, s.rate_pps, cfg))
        s_th = max(s_th, thermal_severity(s.t_hot_c, cfg))
    h = 100.0 - cfg.pd_weight * s_pd - cfg.thermal_weight * s_th
    return min(100.0, max(0.0, h))


def estimate_failure_probability(health_index: float, cfg: KpiConfig = DEFAULT_KPI) -> float:
    z = cfg.logistic_slope * (health_index - cfg.logistic_mid)
    # split on sign so exp never overflows
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def estimate_rul(health_index: float, cfg: KpiConfig = DEFAULT_KPI) -> float:
    return cfg.rul_base_days * min(100.0, max(0.0, health_index)) / 100.0


def kpi_snapshot(
    circuit_id: str,
    time: float,
    current_a: float,
    rated_a: float,
    t_hot_c: float,
    history: Iterable[ConditionSample],
    cfg: KpiConfig = DEFAULT_KPI,
) -> KpiSnapshot:
    h = compute_health_index(history, time, cfg)
    return KpiSnapshot(
        circuit_id,
        time,
        compute_load_factor(current_a, rated_a),
        compute_thermal_margin(t_hot_c, cfg.t_alarm_c, cfg.t_ambient_ref_c),
        h,
        estimate_failure_probability(h, cfg),
        estimate_rul(h, cfg),
    )
