"""An IMU: sampling, screening, ring buffer, register image and alert push."""

from __future__ import annotations

import dataclasses
import threading
from collections import deque

from ..net.modbus import ILLEGAL_ADDRESS, ModbusError, ModbusServerCore
from .alerts import AlertPusher, AlertTransport
from .config import ImuConfig
from .cycle import CycleState, SensorInputs, sample_cycle
from .fsm import FsmState, fsm_step
from .record import Alert, FeatureRecord
from .registers import N_REGISTERS, encode_registers

THRESHOLD_BASE = 0x100

# writable tuning registers: (config field, scale)
THRESHOLD_REGISTERS = (
    ("severe_charge_pc", 1),
    ("severe_gradient_c_per_m", 10),
    ("attention_charge_pc", 1),
    ("temp_alarm_c", 10),
    ("rise_alarm_c_per_min", 10),
    ("enter_debounce", 1),
    ("exit_debounce", 1),
)


class ImuNode:
    """One IMU. Call :meth:`tick` once per sampling period."""

    def __init__(self, cfg: ImuConfig, alert_transport: AlertTransport | None = None):
        self.cfg = cfg
        self.cycle = CycleState()
        self.fsm = FsmState()
        self.ring: deque[FeatureRecord] = deque(maxlen=cfg.ring_size)
        self.alerts: list[Alert] = []
        self.pusher = AlertPusher(alert_transport, capacity=cfg.alert_queue)
        self._snapshot: tuple[int, ...] = tuple([0] * (N_REGISTERS - 1) + [1])
        self._cfg_lock = threading.Lock()
        self.modbus = ModbusServerCore(self)

    @property
    def id(self) -> str:
        return self.cfg.id

    @property
    def latest(self) -> FeatureRecord | None:
        return self.ring[-1] if self.ring else None

    def tick(self, inputs: SensorInputs) -> FeatureRecord:
        with self._cfg_lock:
            cfg = self.cfg
        rec = sample_cycle(cfg, inputs, self.cycle)
        self.fsm, alert = fsm_step(self.fsm, rec, cfg)
        rec = dataclasses.replace(rec, fsm_state=self.fsm.level)
        self.cycle.last = rec
        self.ring.append(rec)
        # a single attribute rebind is atomic: readers see the old or the new image
        self._snapshot = tuple(encode_registers(rec))
        if alert is not None:
            self.alerts.append(alert)
            self.pusher.push(alert, inputs.time)
        else:
            self.pusher.pump(inputs.time)
        return rec

    def records_since(self, seq: int) -> list[FeatureRecord]:
        return [r for r in self.ring if r.seq > seq]

    # RegisterMap

    def read_holding(self, address: int, count: int) -> list[int]:
        if address + count <= N_REGISTERS:
            snap = self._snapshot
            return list(snap[address : address + count])
        off = address - THRESHOLD_BASE
        if 0 <= off and off + count <= len(THRESHOLD_REGISTERS):
            with self._cfg_lock:
                return [
                    int(round(getattr(self.cfg, name) * scale)) & 0xFFFF
                    for name, scale in THRESHOLD_REGISTERS[off : off + count]
                ]
        raise ModbusError(ILLEGAL_ADDRESS, f"registers {address}..{address + count - 1} not mapped")

    def write_register(self, address: int, value: int) -> None:
        off = address - THRESHOLD_BASE
        if not 0 <= off < len(THRESHOLD_REGISTERS):
            raise ModbusError(ILLEGAL_ADDRESS, f"register {address} is not writable")
        name, scale = THRESHOLD_REGISTERS[off]
        new = value if scale == 1 and name.endswith("debounce") else value / scale
        if name.endswith("debounce") and new < 1:
            raise ModbusError(ILLEGAL_ADDRESS, "debounce must be >= 1")
        with self._cfg_lock:
            self.cfg = dataclasses.replace(self.cfg, **{name: type(getattr(self.cfg, name))(new)})
