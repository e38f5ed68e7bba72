"""Fault classification from the events a circuit or IMU has raised."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

from .engine import Event
from .rules import LABEL_ORDER

NORMAL = "Normal"


@dataclass(frozen=True)
class FaultDiagnosis:
    label: str
    score: float
    contributing_metrics: dict[str, float] = field(default_factory=dict)
    rules: tuple[str, ...] = ()


def classify_fault(events: Iterable[Event]) -> FaultDiagnosis:
    """Label with the highest-scoring category; ties go PD, then thermal, then mechanical.

    Events whose diagnosis is ``Normal`` (communications warnings, for example)
    do not count as fired rules.
    """
    best: dict[str, Event] = {}
    fired: dict[str, list[str]] = {}
    for ev in events:
        if ev.diagnosis not in LABEL_ORDER:
            continue
        fired.setdefault(ev.diagnosis, []).append(ev.rule_name)
        cur = best.get(ev.diagnosis)
        if cur is None or ev.score > cur.score:
            best[ev.diagnosis] = ev
    if not best:
        return FaultDiagnosis(NORMAL, 0.0)
    label = max(best, key=lambda lbl: (best[lbl].score, -LABEL_ORDER.index(lbl)))
    ev = best[label]
    return FaultDiagnosis(label, ev.score, dict(ev.metrics), tuple(dict.fromkeys(fired[label])))
