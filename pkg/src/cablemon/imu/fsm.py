"""Three-level screening state machine with debounce."""

from __future__ import annotations

from dataclasses import dataclass

from .config import ImuConfig
from .record import Alert, FeatureRecord, FsmLevel


@dataclass(frozen=True)
class FsmState:
    """Current level plus the run of records pulling away from it.

    ``breaches`` counts consecutive records above the current level and
    ``pending_up`` is the lowest level seen in that run. ``clears`` and
    ``pending_down`` do the same for records below the current level.
    """

    level: FsmLevel = FsmLevel.NORMAL
    breaches: int = 0
    pending_up: FsmLevel = FsmLevel.SEVERE
    clears: int = 0
    pending_down: FsmLevel = FsmLevel.NORMAL


def breach(rec: FeatureRecord, cfg: ImuConfig) -> tuple[FsmLevel, str, float, float]:
    """Highest level whose predicate the record breaches, with the metric that did it."""
    if rec.max_charge_pc > cfg.severe_charge_pc:
        return FsmLevel.SEVERE, "pd_magnitude_pc", rec.max_charge_pc, cfg.severe_charge_pc
    if rec.max_gradient_c_per_m > cfg.severe_gradient_c_per_m:
        return FsmLevel.SEVERE, "temp_gradient_c_per_m", rec.max_gradient_c_per_m, cfg.severe_gradient_c_per_m
    if rec.max_charge_pc > cfg.attention_charge_pc:
        return FsmLevel.ATTENTION, "pd_magnitude_pc", rec.max_charge_pc, cfg.attention_charge_pc
    if rec.max_temp_c > cfg.temp_alarm_c:
        return FsmLevel.ATTENTION, "temp_c", rec.max_temp_c, cfg.temp_alarm_c
    if rec.max_rise_rate_c_per_min > cfg.rise_alarm_c_per_min:
        return FsmLevel.ATTENTION, "temp_rise_c_per_min", rec.max_rise_rate_c_per_min, cfg.rise_alarm_c_per_min
    return FsmLevel.NORMAL, "", 0.0, 0.0


def fsm_step(state: FsmState, rec: FeatureRecord, cfg: ImuConfig) -> tuple[FsmState, Alert | None]:
    level, metric, value, threshold = breach(rec, cfg)
    if level > state.level:
        breaches = state.breaches + 1
        pending = min(state.pending_up, level) if state.breaches else level
        if breaches >= cfg.enter_debounce:
            # the metric reported is the one breaching in the entering record
            if pending < level:
                metric, value, threshold = _metric_for(rec, cfg, pending)
            alert = Alert.make(rec.imu_id, rec.time, pending, metric, value, threshold, rec.seq)
            return FsmState(pending), alert
        return FsmState(state.level, breaches, pending), None
    if level < state.level:
        clears = state.clears + 1
        pending = max(state.pending_down, level) if state.clears else level
        if clears >= cfg.exit_debounce:
            return FsmState(pending), None
        return FsmState(state.level, clears=clears, pending_down=pending), None
    return FsmState(state.level), None


def _metric_for(rec: FeatureRecord, cfg: ImuConfig, level: FsmLevel) -> tuple[str, float, float]:
    if level is FsmLevel.ATTENTION:
        for name, value, threshold in (
            ("pd_magnitude_pc", rec.max_charge_pc, cfg.attention_charge_pc),
            ("temp_c", rec.max_temp_c, cfg.temp_alarm_c),
            ("temp_rise_c_per_min", rec.max_rise_rate_c_per_min, cfg.rise_alarm_c_per_min),
        ):
            if value > threshold:
                return name, value, threshold
    _, name, value, threshold = breach(rec, cfg)
    return name, value, threshold
