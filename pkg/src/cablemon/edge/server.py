"""The edge server: polls IMUs, archives, diagnoses, publishes and notifies."""

from __future__ import annotations

import json
import logging
import threading
import time as _time
from collections.abc import Callable
from dataclasses import dataclass, field

from ..cloud.kpi import compute_load_factor, compute_thermal_margin
from ..imu.alerts import alert_topic
from ..imu.record import Alert, FsmLevel
from ..imu.registers import N_REGISTERS, RegisterRecord, decode_registers
from ..net.errors import MalformedPacket
from ..net.modbus import ModbusClient, ModbusError, PollTimeout
from .diagnosis import FaultDiagnosis, classify_fault
from .engine import DEFAULT_MAX_GAP_S, Event, RuleEngine
from .notify import Notifier
from .rules import Action, RuleSet, Severity
from .store import OutOfOrderAppend, TimeSeriesStore

log = logging.getLogger(__name__)

COMMS_RULE = "imu_comms_stale"
GRADIENT_RULE = "imu_severe_gradient"


def events_topic(site: str, circuit_id: str) -> str:
    return f"mine/{site}/circuit/{circuit_id}/events"


def kpi_topic(site: str, circuit_id: str) -> str:
    return f"mine/{site}/circuit/{circuit_id}/kpi"


@dataclass(frozen=True)
class CircuitInfo:
    id: str
    rated_current_a: float
    t_alarm_c: float = 80.0
    t_ambient_ref_c: float = 25.0


@dataclass
class ImuEndpoint:
    imu_id: str
    circuit_id: str
    client: ModbusClient
    unit_id: int = 1
    failures: int = 0
    stale: bool = False
    last_seq: int = 0
    seq_gaps: int = 0
    latest: RegisterRecord | None = None


@dataclass
class EdgeConfig:
    site: str = "a"
    poll_period_s: float = 1.0
    stale_after: int = 3
    kpi_period_s: float = 10.0
    max_gap_s: float = DEFAULT_MAX_GAP_S


class Publisher:
    def publish(self, topic: str, payload: bytes, qos: int = 1): ...


@dataclass
class CycleStats:
    polled: int = 0
    archived: int = 0
    failures: int = 0
    events: list[Event] = field(default_factory=list)


class EdgeServer:
    def __init__(
        self,
        cfg: EdgeConfig,
        rules: RuleSet,
        circuits: dict[str, CircuitInfo],
        endpoints: list[ImuEndpoint],
        store: TimeSeriesStore,
        publisher: Publisher | None = None,
        notifier: Notifier | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.cfg = cfg
        self.rules = rules
        self.circuits = circuits
        self.endpoints = endpoints
        self.store = store
        self.publisher = publisher
        self.notifier = notifier
        self.clock = clock or _time.time
        self.engine = RuleEngine(rules, cfg.max_gap_s)
        self.events: list[Event] = []
        self.alerts: list[Alert] = []
        self._seen_events: set[str] = set()
        self._seen_alerts: set[str] = set()
        self._lock = threading.RLock()
        self._last_kpi = float("-inf")

    @property
    def alert_filter(self) -> str:
        return alert_topic(self.cfg.site, "+")

    # polling

    def metrics_for(self, ep: ImuEndpoint, rec: RegisterRecord) -> dict[str, float]:
        m = rec.metrics()
        c = self.circuits.get(ep.circuit_id)
        if c is not None:
            m["load_factor_pct"] = compute_load_factor(abs(rec.current_a), c.rated_current_a)
            m["thermal_margin_pct"] = compute_thermal_margin(rec.max_temp_c, c.t_alarm_c, c.t_ambient_ref_c)
        return m

    def poll_cycle(self, now: float | None = None) -> CycleStats:
        now = self.clock() if now is None else now
        stats = CycleStats()
        for ep in self.endpoints:
            try:
                regs = ep.client.read_holding(ep.unit_id, 0, N_REGISTERS)
                rec = decode_registers(regs)
            except (PollTimeout, ModbusError, MalformedPacket, ValueError) as exc:
                stats.failures += 1
                ep.failures += 1
                log.debug("poll %s failed: %s", ep.imu_id, exc)
                if ep.failures >= self.cfg.stale_after and not ep.stale:
                    ep.stale = True
                    ev = Event.make(
                        now, ep.circuit_id, ep.imu_id, COMMS_RULE, Severity.WARNING, "Normal",
                        {"consecutive_timeouts": float(ep.failures)}, 0.0, f"{now!r}",
                    )
                    stats.events.append(self.emit(ev, now, Action.RAISE_AND_NOTIFY))
                continue
            ep.failures = 0
            ep.stale = False
            stats.polled += 1
            if rec.seq == ep.last_seq:
                continue
            if ep.last_seq and rec.seq > ep.last_seq + 1:
                ep.seq_gaps += rec.seq - ep.last_seq - 1
            ep.last_seq = rec.seq
            ep.latest = rec
            metrics = self.metrics_for(ep, rec)
            self.archive(ep.imu_id, rec.time, metrics, rec)
            stats.archived += 1
            for ev in self.engine.observe(ep.imu_id, ep.circuit_id, rec.time, metrics):
                rule = self.rules.get(ev.rule_name)
                stats.events.append(self.emit(ev, now, rule.action))
        if now - self._last_kpi >= self.cfg.kpi_period_s:
            self.publish_kpis(now)
        return stats

    def archive(self, imu_id: str, t: float, metrics: dict[str, float], rec: RegisterRecord) -> None:
        values = dict(metrics)
        values["fsm_state"] = float(rec.fsm_state)
        values["quality"] = float(rec.quality)
        for name, v in values.items():
            try:
                self.store.append(f"{imu_id}/{name}", t, v)
            except OutOfOrderAppend:
                log.warning("dropping out-of-order sample %s/%s at %s", imu_id, name, t)

    # events

    def emit(self, ev: Event, now: float, action: Action = Action.RAISE_EVENT) -> Event:
        with self._lock:
            if ev.uuid in self._seen_events:
                return ev
            self._seen_events.add(ev.uuid)
            self.events.append(ev)
            doc = json.dumps(ev.to_json(), sort_keys=True).encode()
            last = self.store.last("events")
            self.store.append("events", max(now, last[0]) if last else now, doc)
        if self.publisher is not None:
            self.publisher.publish(events_topic(self.cfg.site, ev.circuit_id), doc, 1)
        if self.notifier is not None and action.notifies:
            self.notifier.notify(ev)
        return ev

    def on_message(self, msg) -> None:
        """MQTT callback: IMU alerts, deduplicated on uuid."""
        try:
            alert = Alert.from_json(json.loads(msg.payload))
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("bad alert payload on %s: %s", msg.topic, exc)
            return
        self.handle_alert(alert)

    def handle_alert(self, alert: Alert, now: float | None = None) -> Event | None:
        now = alert.time if now is None else now
        with self._lock:
            if alert.uuid in self._seen_alerts:
                return None
            self._seen_alerts.add(alert.uuid)
            self.alerts.append(alert)
            series = f"{alert.imu_id}/alerts"
            last = self.store.last(series)
            self.store.append(series, max(alert.time, last[0]) if last else alert.time, json.dumps(alert.to_json()).encode())
        # gradient severity has no edge rule of its own: the IMU's screen is authoritative
        if alert.entered_state is FsmLevel.SEVERE and alert.metric == "temp_gradient_c_per_m":
            ep = next((e for e in self.endpoints if e.imu_id == alert.imu_id), None)
            circuit = ep.circuit_id if ep else ""
            score = 100.0 * max(0.0, min(1.0, alert.value / alert.threshold - 0.5)) if alert.threshold else 100.0
            ev = Event.make(
                alert.time, circuit, alert.imu_id, GRADIENT_RULE, Severity.CRITICAL, "Overheating",
                {"temp_gradient_c_per_m": alert.value}, score, alert.uuid,
            )
            return self.emit(ev, now, Action.RAISE_AND_NOTIFY)
        return None

    # KPI telemetry

    def circuit_summary(self, circuit_id: str) -> dict | None:
        recs = [ep.latest for ep in self.endpoints if ep.circuit_id == circuit_id and ep.latest is not None]
        if not recs:
            return None
        hottest = max(recs, key=lambda r: r.max_temp_c)
        pd = max(recs, key=lambda r: r.max_charge_pc)
        return {
            "circuit_id": circuit_id,
            "rated_current_a": self.circuits[circuit_id].rated_current_a,
            "time": max(r.time for r in recs),
            "current_a": sum(abs(r.current_a) for r in recs) / len(recs),
            "t_hot_c": hottest.max_temp_c,
            "max_charge_pc": pd.max_charge_pc,
            "rate_pps": pd.rate_pps,
        }

    def publish_kpis(self, now: float) -> list[dict]:
        self._last_kpi = now
        out = []
        for cid in self.circuits:
            doc = self.circuit_summary(cid)
            if doc is None:
                continue
            out.append(doc)
            if self.publisher is not None:
                self.publisher.publish(kpi_topic(self.cfg.site, cid), json.dumps(doc, sort_keys=True).encode(), 1)
        return out

    # diagnosis

    def diagnose(self, imu_id: str | None = None, circuit_id: str | None = None) -> FaultDiagnosis:
        evs = [
            e
            for e in self.events
            if (imu_id is None or e.imu_id == imu_id) and (circuit_id is None or e.circuit_id == circuit_id)
        ]
        return classify_fault(evs)

    def run(self, stop: threading.Event) -> None:
        """Real-time loop for socket deployments."""
        next_t = self.clock()
        while not stop.is_set():
            self.poll_cycle(self.clock())
            next_t += self.cfg.poll_period_s
            stop.wait(max(0.0, next_t - self.clock()))


def poll_loop(server: EdgeServer, stop: threading.Event) -> None:
    server.run(stop)
