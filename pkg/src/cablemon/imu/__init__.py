"""Intelligent Monitoring Unit: per-tick features, FSM screening, registers, alerts."""

from .alerts import AlertPusher, DeliveryReceipt, MqttAlertTransport, alert_topic, push_alert
from .config import ImuConfig
from .cycle import CycleState, SensorInputs, sample_cycle
from .fsm import FsmState, breach, fsm_step
from .node import ImuNode
from .record import Alert, FeatureRecord, FsmLevel, Quality
from .registers import RegisterRecord, decode_registers, encode_registers

__all__ = [
    "Alert",
    "AlertPusher",
    "CycleState",
    "DeliveryReceipt",
    "FeatureRecord",
    "FsmLevel",
    "FsmState",
    "ImuConfig",
    "ImuNode",
    "MqttAlertTransport",
    "Quality",
    "RegisterRecord",
    "SensorInputs",
    "alert_topic",
    "breach",
    "decode_registers",
    "encode_registers",
    "fsm_step",
    "push_alert",
    "sample_cycle",
]
