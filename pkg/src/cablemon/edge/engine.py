"""Edge-triggered rule evaluation over per-IMU metric streams."""

from __future__ import annotations

import uuid as uuidlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from ..imu.record import UUID_NAMESPACE
from .rules import Rule, RuleSet, Severity, holds

DEFAULT_MAX_GAP_S = 5.0


@dataclass(frozen=True)
class Event:
    uuid: str
    time: float
    circuit_id: str
    imu_id: str
    rule_name: str
    severity: Severity
    diagnosis: str
    metrics: dict[str, float] = field(default_factory=dict)
    score: float = 0.0

    @staticmethod
    def make(
        time: float,
        circuit_id: str,
        imu_id: str,
        rule_name: str,
        severity: Severity,
        diagnosis: str,
        metrics: Mapping[str, float],
        score: float,
        key: str,
    ) -> "Event":
        uid = str(uuidlib.uuid5(UUID_NAMESPACE, f"event/{imu_id}/{rule_name}/{key}"))
        return Event(uid, time, circuit_id, imu_id, rule_name, Severity(severity), diagnosis, dict(metrics), score)

    def to_json(self) -> dict:
        return {
            "uuid": self.uuid,
            "time": self.time,
            "circuit_id": self.circuit_id,
            "imu_id": self.imu_id,
            "rule_name": self.rule_name,
            "severity": self.severity.value,
            "diagnosis": self.diagnosis,
            "metrics": dict(self.metrics),
            "score": self.score,
        }

    @staticmethod
    def from_json(d: Mapping) -> "Event":
        metrics = d.get("metrics", {})
        if not isinstance(metrics, Mapping):
            raise ValueError("metrics must be an object")
        return Event(
            uuid=str(d["uuid"]),
            time=float(d["time"]),
            circuit_id=str(d["circuit_id"]),
            imu_id=str(d["imu_id"]),
            rule_name=str(d["rule_name"]),
            severity=Severity(d["severity"]),
            diagnosis=str(d["diagnosis"]),
            metrics={str(k): float(v) for k, v in metrics.items()},
            score=float(d.get("score", 0.0)),
        )


@dataclass
class _RunState:
    run_start: float | None = None
    last_time: float | None = None
    firing: bool = False


class RuleEngine:
    """Stateful evaluator. Feed samples in time order per IMU with :meth:`observe`.

    A rule fires once its condition has held at every sample spanning at least
    ``sustain_s``. It raises one event on the transition into firing and stays
    quiet until the condition breaks. A gap longer than ``max_gap_s`` between
    samples breaks the run.
    """

    def __init__(self, rules: RuleSet, max_gap_s: float = DEFAULT_MAX_GAP_S):
        self.rules = rules
        self.max_gap_s = max_gap_s
        self._state: dict[tuple[str, str], _RunState] = {}

    def reset(self, imu_id: str | None = None) -> None:
        if imu_id is None:
            self._state.clear()
        else:
            for key in [k for k in self._state if k[1] == imu_id]:
                del self._state[key]

    def firing(self, imu_id: str) -> list[str]:
        return [r for (r, i), s in self._state.items() if i == imu_id and s.firing]

    def observe(self, imu_id: str, circuit_id: str, t: float, metrics: Mapping[str, float]) -> list[Event]:
        events = []
        for rule in self.rules:
            ev = self._step(rule, imu_id, circuit_id, t, metrics)
            if ev is not None:
                events.append(ev)
        return events

    def _step(self, rule: Rule, imu_id: str, circuit_id: str, t: float, metrics: Mapping[str, float]) -> Event | None:
        st = self._state.setdefault((rule.name, imu_id), _RunState())
        if st.last_time is not None and t - st.last_time > self.max_gap_s:
            st.run_start, st.firing = None, False
        st.last_time = t
        if not holds(rule.condition, dict(metrics)):
            st.run_start, st.firing = None, False
            return None
        if st.run_start is None:
            st.run_start = t
        if st.firing or t - st.run_start < rule.sustain_s:
            return None
        st.firing = True
        snap = dict(metrics)
        return Event.make(
            t, circuit_id, imu_id, rule.name, rule.severity, rule.label, snap, rule.score(snap), f"{st.run_start!r}"
        )


def evaluate_rules(
    rules: RuleSet,
    window: Mapping[str, Iterable[tuple[float, Mapping[str, float]]]],
    circuits: Mapping[str, str] | None = None,
    max_gap_s: float = DEFAULT_MAX_GAP_S,
) -> list[Event]:
    """Events raised by ``rules`` over per-IMU sample series ``{imu_id: [(t, metrics), ...]}``."""
    engine = RuleEngine(rules, max_gap_s)
    circuits = circuits or {}
    out: list[Event] = []
    for imu_id in sorted(window):
        for t, metrics in sorted(window[imu_id], key=lambda s: s[0]):
            out.extend(engine.observe(imu_id, circuits.get(imu_id, ""), t, metrics))
    out.sort(key=lambda e: (e.time, e.imu_id, e.rule_name))
    return out
