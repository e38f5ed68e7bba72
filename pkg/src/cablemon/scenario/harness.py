"""Wires simulator, IMUs, edge server and cloud service together and drives them on one clock.

The default wiring is in-process: Modbus and MQTT go through the loopback
transports (still byte-framed), and every component reads the harness clock,
so a run is fully deterministic. :class:`SocketPipeline` swaps in TCP
transports and a broker running as a separate OS process.
"""

from __future__ import annotations

import logging
import re
import subprocess
import sys
import time as _time
from dataclasses import dataclass
from pathlib import Path

from ..cloud.kpi import KpiConfig, KpiSnapshot, RecommendationKind
from ..cloud.service import CloudService, ingest_events
from ..edge import default_rules
from ..edge.notify import FileSink, Notifier
from ..edge.rules import RuleSet, parse_rules
from ..edge.server import CircuitInfo, EdgeConfig, EdgeServer, ImuEndpoint
from ..edge.store import TimeSeriesStore
from ..imu.alerts import MqttAlertTransport
from ..imu.node import ImuNode
from ..net.client import TcpMqttClient
from ..net.modbus import ModbusClient
from ..net.transport import FaultInjector, LoopbackModbus, LoopbackMqtt, TcpModbusServer, TcpModbusTransport
from ..sim.network import Scenario
from ..sim.simulator import Simulator

log = logging.getLogger(__name__)

# the edge archive is buffered and written out this often; close() writes the rest
FLUSH_EVERY_TICKS = 60


class ComponentError(RuntimeError):
    """A pipeline component failed to start."""

    def __init__(self, component: str, cause: BaseException | str):
        super().__init__(f"{component} failed to start: {cause}")
        self.component = component


def kpi_config(scenario: Scenario) -> KpiConfig:
    known = set(KpiConfig.__dataclass_fields__)
    return KpiConfig(**{k: v for k, v in scenario.cloud.items() if k in known})


def rules_for(scenario: Scenario, rules: RuleSet | str | None) -> RuleSet:
    if isinstance(rules, RuleSet):
        return rules
    if isinstance(rules, str):
        return parse_rules(rules)
    path = scenario.edge.get("rules_file")
    if path:
        return parse_rules(Path(path).read_text())
    return default_rules()


@dataclass
class Checkpoint:
    name: str
    time: float
    kpis: dict[str, KpiSnapshot]
    recommendations: dict[str, str]


class Pipeline:
    """In-process wiring over loopback transports."""

    def __init__(
        self,
        scenario: Scenario,
        workdir: str | Path,
        rules: RuleSet | str | None = None,
        fault: FaultInjector | None = None,
    ):
        self.scenario = scenario
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.now = scenario.start_time
        self.sim = Simulator(scenario)
        self.rules = rules_for(scenario, rules)
        self.kpi_cfg = kpi_config(scenario)
        self.site = scenario.network.site_id
        self.poll_period_s = float(scenario.edge.get("poll_period_s", 1.0))
        self.fault = fault
        self.load_overrides: dict[str, tuple[float, float]] = {}
        self._next_poll = scenario.start_time
        self._ticks = 0
        self._open()

    # wiring

    def clock(self) -> float:
        return self.now

    def _edge_config(self) -> EdgeConfig:
        return EdgeConfig(
            site=self.site,
            poll_period_s=self.poll_period_s,
            stale_after=int(self.scenario.edge.get("stale_after", 3)),
            kpi_period_s=float(self.scenario.edge.get("kpi_period_s", 10.0)),
        )

    def _circuits(self) -> dict[str, CircuitInfo]:
        return {
            c.id: CircuitInfo(c.id, c.rated_current_a, self.kpi_cfg.t_alarm_c, self.kpi_cfg.t_ambient_ref_c)
            for c in self.scenario.network.circuits
        }

    def _notifier(self) -> Notifier:
        return Notifier([FileSink(self.workdir / "notifications.jsonl")], self.workdir / "dead_letter.jsonl")

    def _open(self) -> None:
        self.mqtt = LoopbackMqtt(retry_s=float(self.scenario.edge.get("mqtt_retry_s", 2.0)), fault=self.fault)
        self.imus: dict[str, ImuNode] = {}
        for cfg in self.sim.imu_configs:
            self.imus[cfg.id] = ImuNode(cfg, MqttAlertTransport(self.mqtt.connect(cfg.id), self.site))
        endpoints = [
            ImuEndpoint(n.id, n.cfg.circuit_id, ModbusClient(LoopbackModbus(n.modbus)), n.cfg.unit_id)
            for n in self.imus.values()
        ]
        self.edge_store = TimeSeriesStore(self.workdir / "edge", autoflush=False)
        self.edge = EdgeServer(
            self._edge_config(), self.rules, self._circuits(), endpoints, self.edge_store,
            notifier=self._notifier(), clock=self.clock,
        )
        edge_client = self.mqtt.connect("edge", on_message=self.edge.on_message)
        edge_client.subscribe(self.edge.alert_filter, 1)
        self.edge.publisher = edge_client
        self.cloud_store = TimeSeriesStore(self.workdir / "cloud")
        self.cloud = CloudService(
            self.cloud_store,
            {c.id: c.rated_current_a for c in self.scenario.network.circuits},
            self.kpi_cfg,
            clock=self.clock,
            reject_log=str(self.workdir / "rejects.jsonl"),
        )
        ingest_events(self.cloud, self.mqtt.connect("cloud", on_message=self.cloud.on_message))

    def close(self) -> None:
        self.edge_store.close()
        self.cloud_store.close()

    def __enter__(self) -> "Pipeline":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # driving

    def set_load(self, circuit_id: str, amps: float, since: float) -> None:
        self.load_overrides[circuit_id] = (since, amps)
        base = self.sim.load_a

        def load_a(circuit, t, _base=base):
            ov = self.load_overrides.get(circuit.id)
            if ov is not None and t >= ov[0]:
                return ov[1]
            return _base(circuit, t)

        self.sim.load_a = load_a

    def settle(self) -> None:
        self.mqtt.advance(self.now)

    def _set_transport_time(self, t: float) -> None:
        # loopback retransmission timers run on the simulated clock
        self.mqtt.now = t

    def step(self, t: float) -> None:
        """One tick: IMUs sample, alerts flow, the edge polls if due, the cloud ingests."""
        self.now = t
        self._set_transport_time(t)
        for node in self.imus.values():
            node.tick(self.sim.inputs(node.id, t))
        self.settle()
        if t + 1e-9 >= self._next_poll:
            self.edge.poll_cycle(t)
            while self._next_poll <= t + 1e-9:
                self._next_poll += self.poll_period_s
        self.settle()
        self.cloud.ingest(t)
        self._ticks += 1
        if self._ticks % FLUSH_EVERY_TICKS == 0:
            self.edge_store.flush()

    def checkpoint(self, name: str, t: float) -> Checkpoint:
        """Force a KPI publication and read back what the cloud computed."""
        self.edge.publish_kpis(t)
        self.settle()
        self.cloud.ingest(t)
        kpis, recs = {}, {}
        for c in self.scenario.network.circuits:
            snap, rec = self.cloud.latest(c.id)
            if snap is not None:
                kpis[c.id] = snap
            recs[c.id] = rec.kind.value if rec else RecommendationKind.NONE.value
        return Checkpoint(name, t, kpis, recs)

    def apply_recommendations(self, t: float) -> dict[str, float]:
        """Act on the cloud's load recommendation for every circuit, as an operator would."""
        applied = {}
        for c in self.scenario.network.circuits:
            _, rec = self.cloud.latest(c.id)
            if rec is not None and rec.kind is not RecommendationKind.NONE and rec.target_load_factor_pct:
                amps = rec.target_load_factor_pct / 100.0 * c.rated_current_a
                self.set_load(c.id, amps, t)
                applied[c.id] = amps
        return applied


class SocketPipeline(Pipeline):
    """Same wiring over TCP: the MQTT broker is a child process, each IMU serves Modbus on its own port."""

    def __init__(self, *args, compress: float = 1.0, **kwargs):
        self.compress = compress
        self._procs: list[subprocess.Popen] = []
        self._servers: list[TcpModbusServer] = []
        self._clients: list[TcpMqttClient] = []
        try:
            super().__init__(*args, **kwargs)
        except BaseException:
            # nothing else will stop what did start
            self._stop_transports()
            raise

    def _start_broker(self) -> int:
        try:
            proc = subprocess.Popen(
                [sys.executable, "-m", "cablemon.net.broker", "--port", "0"],
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise ComponentError("mqtt broker", exc) from exc
        self._procs.append(proc)
        line = proc.stdout.readline()
        m = re.search(r":(\d+)\s*$", line)
        if not m:
            proc.kill()
            raise ComponentError("mqtt broker", f"unexpected banner {line!r}")
        return int(m.group(1))

    def _mqtt(self, client_id: str, on_message=None) -> TcpMqttClient:
        try:
            c = TcpMqttClient(client_id, "127.0.0.1", self.broker_port, on_message)
        except OSError as exc:
            raise ComponentError(f"mqtt client {client_id}", exc) from exc
        self._clients.append(c)
        return c

    def _open(self) -> None:
        self.broker_port = self._start_broker()
        self.imus = {}
        endpoints = []
        for cfg in self.sim.imu_configs:
            node = ImuNode(cfg, MqttAlertTransport(self._mqtt(cfg.id), self.site))
            self.imus[cfg.id] = node
            try:
                srv = TcpModbusServer(("127.0.0.1", 0), node.modbus).start()
            except OSError as exc:
                raise ComponentError(f"imu {cfg.id} modbus server", exc) from exc
            self._servers.append(srv)
            endpoints.append(
                ImuEndpoint(node.id, cfg.circuit_id, ModbusClient(TcpModbusTransport("127.0.0.1", srv.port)), cfg.unit_id)
            )
        self.edge_store = TimeSeriesStore(self.workdir / "edge", autoflush=False)
        self.edge = EdgeServer(
            self._edge_config(), self.rules, self._circuits(), endpoints, self.edge_store,
            notifier=self._notifier(), clock=self.clock,
        )
        edge_client = self._mqtt("edge", self.edge.on_message)
        edge_client.subscribe(self.edge.alert_filter, 1)
        self.edge.publisher = edge_client
        self.cloud_store = TimeSeriesStore(self.workdir / "cloud")
        self.cloud = CloudService(
            self.cloud_store,
            {c.id: c.rated_current_a for c in self.scenario.network.circuits},
            self.kpi_cfg,
            clock=self.clock,
            reject_log=str(self.workdir / "rejects.jsonl"),
        )
        ingest_events(self.cloud, self._mqtt("cloud", self.cloud.on_message))

    def _set_transport_time(self, t: float) -> None:
        pass  # TCP clients retry on wall time

    def settle(self, timeout: float = 2.0) -> None:
        # wait for every QoS 1 publish to be acknowledged, then give fan-out a moment
        deadline = _time.monotonic() + timeout
        while any(c.pending() for c in self._clients) and _time.monotonic() < deadline:
            _time.sleep(0.001)
        _time.sleep(0.002)

    def step(self, t: float) -> None:
        started = _time.monotonic()
        super().step(t)
        if self.compress > 0:
            rest = self.scenario.tick_s / self.compress - (_time.monotonic() - started)
            if rest > 0:
                _time.sleep(rest)

    def _stop_transports(self) -> None:
        for c in self._clients:
            c.close()
        for s in self._servers:
            s.stop()
        for p in self._procs:
            p.terminate()
            try:
                p.wait(timeout=5)
            except subprocess.TimeoutExpired:
                p.kill()

    def close(self) -> None:
        self._stop_transports()
        super().close()
