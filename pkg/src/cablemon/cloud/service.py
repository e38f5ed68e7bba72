"""Cloud ingestion: events and KPI telemetry from edge servers, deduplicated and persisted."""

from __future__ import annotations

import json
import logging
import threading
import time as _time
from collections import deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

from ..edge.engine import Event
from ..edge.rules import Severity
from ..edge.store import TimeSeriesStore
from .kpi import (
    DEFAULT_KPI,
    ConditionSample,
    KpiConfig,
    KpiSnapshot,
    Recommendation,
    kpi_snapshot,
    recommend_load_action,
)

log = logging.getLogger(__name__)

EVENTS_FILTER = "mine/+/circuit/+/events"
KPI_FILTER = "mine/+/circuit/+/kpi"
HIGH_PRIORITY_RULES = frozenset({"severe_discharge"})


@dataclass(frozen=True)
class StoredEvent:
    event: Event
    ingest_time: float
    priority: str  # high | normal

    def to_json(self) -> dict:
        doc = self.event.to_json()
        doc["ingest_time"] = self.ingest_time
        doc["priority"] = self.priority
        return doc

    @staticmethod
    def from_json(d: Mapping) -> "StoredEvent":
        return StoredEvent(Event.from_json(d), float(d["ingest_time"]), str(d["priority"]))


@dataclass(frozen=True)
class Reject:
    time: float
    topic: str
    reason: str
    payload: bytes


@dataclass
class CircuitState:
    id: str
    rated_current_a: float | None = None
    history: deque = field(default_factory=deque)
    snapshot: KpiSnapshot | None = None
    recommendation: Recommendation | None = None


def priority_of(event: Event) -> str:
    if event.severity is Severity.CRITICAL or event.rule_name in HIGH_PRIORITY_RULES:
        return "high"
    return "normal"


class CloudService:
    """Single writer over the cloud store. ``on_message`` only enqueues; :meth:`ingest` does the work.

    Read accessors return copies so API threads never see a half-applied update.
    """

    def __init__(
        self,
        store: TimeSeriesStore,
        rated_currents: Mapping[str, float] | None = None,
        cfg: KpiConfig = DEFAULT_KPI,
        clock: Callable[[], float] | None = None,
        reject_log: str | None = None,
    ):
        self.store = store
        self.cfg = cfg
        self.clock = clock or _time.time
        self.reject_log = reject_log
        self.circuits: dict[str, CircuitState] = {
            cid: CircuitState(cid, rated) for cid, rated in (rated_currents or {}).items()
        }
        self.rejects: list[Reject] = []
        self._inbox: deque = deque()
        self._events: list[StoredEvent] = []
        self._uuids: set[str] = set()
        self._lock = threading.Lock()
        self._reload()

    def _reload(self) -> None:
        for _, raw in self.store.query("events", float("-inf"), float("inf")):
            se = StoredEvent.from_json(json.loads(raw))
            if se.event.uuid not in self._uuids:
                self._uuids.add(se.event.uuid)
                self._events.append(se)
        for series in self.store.series("kpi/"):
            last = self.store.last(series)
            if last is not None:
                snap = KpiSnapshot.from_json(json.loads(last[1]))
                self._circuit(snap.circuit_id).snapshot = snap

    def _circuit(self, cid: str) -> CircuitState:
        st = self.circuits.get(cid)
        if st is None:
            st = self.circuits[cid] = CircuitState(cid)
        return st

    # ingestion

    @property
    def subscriptions(self) -> tuple[str, ...]:
        return (EVENTS_FILTER, KPI_FILTER)

    def on_message(self, msg) -> None:
        self._inbox.append((msg.topic, bytes(msg.payload)))

    def ingest(self, now: float | None = None) -> int:
        """Drain everything received so far. Returns the number of messages handled."""
        now = self.clock() if now is None else now
        n = 0
        while self._inbox:
            topic, payload = self._inbox.popleft()
            n += 1
            try:
                if topic.endswith("/events"):
                    self._ingest_event(payload, now)
                elif topic.endswith("/kpi"):
                    self._ingest_kpi(payload, now)
                else:
                    raise ValueError("unexpected topic")
            except (ValueError, KeyError, TypeError) as exc:
                self._reject(now, topic, str(exc), payload)
        return n

    def _reject(self, now: float, topic: str, reason: str, payload: bytes) -> None:
        log.warning("rejected message on %s: %s", topic, reason)
        self.rejects.append(Reject(now, topic, reason, payload))
        if self.reject_log:
            with open(self.reject_log, "a", encoding="utf-8") as f:
                f.write(json.dumps({"time": now, "topic": topic, "reason": reason,
                                    "payload": payload.decode("utf-8", "replace")}) + "\n")

    def _append(self, series: str, t: float, doc: dict) -> None:
        last = self.store.last(series)
        self.store.append(series, max(t, last[0]) if last else t, json.dumps(doc, sort_keys=True).encode())

    def _ingest_event(self, payload: bytes, now: float) -> None:
        doc = json.loads(payload)
        if not isinstance(doc, dict):
            raise ValueError("event document must be an object")
        ev = Event.from_json(doc)
        if ev.uuid in self._uuids:
            return
        se = StoredEvent(ev, now, priority_of(ev))
        self._append("events", now, se.to_json())
        with self._lock:
            self._uuids.add(ev.uuid)
            self._events.append(se)
        m = ev.metrics
        if "pd_magnitude_pc" in m or "temp_c" in m:
            self._circuit(ev.circuit_id).history.append(
                ConditionSample(ev.time, m.get("pd_magnitude_pc", 0.0), m.get("pd_rate_pps", 0.0),
                                m.get("temp_c", float("-inf")))
            )

    def _ingest_kpi(self, payload: bytes, now: float) -> None:
        doc = json.loads(payload)
        if not isinstance(doc, dict):
            raise ValueError("telemetry document must be an object")
        cid = str(doc["circuit_id"])
        t = float(doc["time"])
        st = self._circuit(cid)
        rated = st.rated_current_a or doc.get("rated_current_a")
        if not rated:
            raise ValueError(f"no rated current known for circuit {cid}")
        st.history.append(
            ConditionSample(t, float(doc.get("max_charge_pc", 0.0)), float(doc.get("rate_pps", 0.0)),
                            float(doc["t_hot_c"]))
        )
        while st.history and st.history[0].time < t - self.cfg.health_window_s:
            st.history.popleft()
        if st.snapshot is not None and t < st.snapshot.time:
            raise ValueError(f"telemetry for {cid} went back in time")
        snap = kpi_snapshot(cid, t, float(doc["current_a"]), float(rated), float(doc["t_hot_c"]), st.history, self.cfg)
        rec = recommend_load_action(snap.load_factor_pct, snap.thermal_margin_pct, circuit_id=cid, time=t, cfg=self.cfg)
        self._append(f"kpi/{cid}", t, snap.to_json())
        with self._lock:
            st.snapshot, st.recommendation = snap, rec

    # read side

    def events(self) -> list[StoredEvent]:
        with self._lock:
            return list(self._events)

    def alarms(self, since: float | None = None, severity: str | None = None,
               priority: str | None = None) -> list[StoredEvent]:
        out = []
        for se in self.events():
            if since is not None and se.event.time < since:
                continue
            if severity is not None and se.event.severity.value != severity:
                continue
            if priority is not None and se.priority != priority:
                continue
            out.append(se)
        return out

    def kpi_history(self, circuit_id: str, since: float | None = None) -> list[KpiSnapshot]:
        lo = float("-inf") if since is None else since
        return [KpiSnapshot.from_json(json.loads(v)) for _, v in self.store.query(f"kpi/{circuit_id}", lo, float("inf"))]

    def latest(self, circuit_id: str) -> tuple[KpiSnapshot | None, Recommendation | None]:
        with self._lock:
            st = self.circuits.get(circuit_id)
            return (st.snapshot, st.recommendation) if st else (None, None)


def ingest_events(service: CloudService, client) -> None:
    """Subscribe ``client`` (whose message callback is ``service.on_message``) to edge topics."""
    for topic in service.subscriptions:
        client.subscribe(topic, 1)
