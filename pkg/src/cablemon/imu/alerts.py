"""Outbound alert queue with retry/backoff on the simulated clock."""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass
from typing import Protocol

from .record import Alert

log = logging.getLogger(__name__)


class AlertTransport(Protocol):
    @property
    def connected(self) -> bool: ...

    def send(self, alert: Alert) -> bool:
        """Hand the alert to the link. True means accepted for at-least-once delivery."""


@dataclass(frozen=True)
class DeliveryReceipt:
    uuid: str
    delivered: bool
    attempts: int
    queued: int


def alert_topic(site: str, imu_id: str) -> str:
    return f"mine/{site}/imu/{imu_id}/alerts"


class MqttAlertTransport:
    """Publishes alerts as JSON, QoS 1. The MQTT client owns retransmission."""

    def __init__(self, client, site: str):
        self.client = client
        self.site = site

    @property
    def connected(self) -> bool:
        return bool(getattr(self.client, "connected", True))

    def send(self, alert: Alert) -> bool:
        if not self.connected:
            return False
        self.client.publish(alert_topic(self.site, alert.imu_id), json.dumps(alert.to_json()).encode(), 1)
        return True


class AlertPusher:
    """Bounded FIFO of alerts awaiting hand-off; oldest dropped on overflow."""

    def __init__(self, transport: AlertTransport | None, capacity: int = 256, base_backoff_s: float = 1.0, max_backoff_s: float = 30.0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.transport = transport
        self.queue: deque[Alert] = deque()
        self.capacity = capacity
        self.base_backoff_s = base_backoff_s
        self.max_backoff_s = max_backoff_s
        self.dropped = 0
        self.delivered: list[str] = []
        self._attempts: dict[str, int] = {}
        self._next_try = float("-inf")
        self._backoff = base_backoff_s

    def push(self, alert: Alert, now: float) -> DeliveryReceipt:
        if len(self.queue) >= self.capacity:
            lost = self.queue.popleft()
            self.dropped += 1
            log.warning("alert queue full, dropped %s", lost.uuid)
        self.queue.append(alert)
        self.pump(now)
        waiting = any(a.uuid == alert.uuid for a in self.queue)
        return DeliveryReceipt(alert.uuid, not waiting, self._attempts.get(alert.uuid, 0), len(self.queue))

    def pump(self, now: float) -> int:
        """Try to hand off queued alerts. Returns how many left the queue."""
        sent = 0
        while self.queue and now >= self._next_try:
            head = self.queue[0]
            self._attempts[head.uuid] = self._attempts.get(head.uuid, 0) + 1
            ok = False
            if self.transport is not None:
                try:
                    ok = self.transport.send(head)
                except OSError as exc:
                    log.info("alert send failed: %s", exc)
            if not ok:
                self._next_try = now + self._backoff
                self._backoff = min(self._backoff * 2, self.max_backoff_s)
                break
            self.queue.popleft()
            self.delivered.append(head.uuid)
            self._backoff = self.base_backoff_s
            self._next_try = float("-inf")
            sent += 1
        return sent


def push_alert(alert: Alert, transport: AlertTransport | AlertPusher, now: float = 0.0) -> DeliveryReceipt:
    """Send one alert; without a pusher the alert is attempted once and not queued."""
    pusher = transport if isinstance(transport, AlertPusher) else AlertPusher(transport, capacity=1)
    return pusher.push(alert, now)
