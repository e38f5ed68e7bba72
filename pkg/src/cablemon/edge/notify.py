"""Notification dispatch to maintenance staff: a JSON-lines file and/or a webhook."""

from __future__ import annotations

import json
import logging
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .engine import Event

log = logging.getLogger(__name__)


class Sink(Protocol):
    name: str

    def deliver(self, doc: dict) -> None:
        """Raise on failure."""


class FileSink:
    def __init__(self, path: str | os.PathLike, name: str = "file"):
        self.path = Path(path)
        self.name = name
        self._lock = threading.Lock()

    def deliver(self, doc: dict) -> None:
        line = json.dumps(doc, sort_keys=True) + "\n"
        with self._lock, open(self.path, "a", encoding="utf-8") as f:
            f.write(line)


class WebhookSink:
    def __init__(self, url: str, timeout: float = 5.0, name: str = "webhook"):
        self.url = url
        self.timeout = timeout
        self.name = name

    def deliver(self, doc: dict) -> None:
        req = urllib.request.Request(
            self.url, data=json.dumps(doc).encode(), headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            if not 200 <= resp.status < 300:
                raise OSError(f"webhook returned HTTP {resp.status}")


@dataclass(frozen=True)
class Receipt:
    uuid: str
    sink: str
    status: str  # delivered | duplicate | dead_letter
    attempts: int


def notification_document(event: Event) -> dict:
    return {
        "uuid": event.uuid,
        "time": event.time,
        "severity": event.severity.value,
        "rule": event.rule_name,
        "diagnosis": event.diagnosis,
        "circuit_id": event.circuit_id,
        "imu_id": event.imu_id,
        "metrics": event.metrics,
        "message": f"{event.severity.value} {event.diagnosis} on circuit {event.circuit_id} at {event.imu_id} ({event.rule_name})",
    }


class Notifier:
    """Delivers each event uuid at most once per sink; failures go to a dead-letter file."""

    def __init__(self, sinks: list[Sink], dead_letter: str | os.PathLike | None = None, retries: int = 3):
        self.sinks = sinks
        self.dead_letter = Path(dead_letter) if dead_letter else None
        self.retries = retries
        self._seen: set[tuple[str, str]] = set()
        self._lock = threading.Lock()

    def notify(self, event: Event) -> list[Receipt]:
        doc = notification_document(event)
        receipts = []
        for sink in self.sinks:
            key = (event.uuid, sink.name)
            with self._lock:
                if key in self._seen:
                    receipts.append(Receipt(event.uuid, sink.name, "duplicate", 0))
                    continue
                self._seen.add(key)
            receipts.append(self._deliver(sink, doc))
        return receipts

    def _deliver(self, sink: Sink, doc: dict) -> Receipt:
        error = ""
        for attempt in range(1, self.retries + 1):
            try:
                sink.deliver(doc)
                return Receipt(doc["uuid"], sink.name, "delivered", attempt)
            except (OSError, urllib.error.URLError) as exc:
                error = str(exc)
                log.info("sink %s attempt %d failed: %s", sink.name, attempt, exc)
        if self.dead_letter is not None:
            with self._lock, open(self.dead_letter, "a", encoding="utf-8") as f:
                f.write(json.dumps({"sink": sink.name, "error": error, "document": doc}, sort_keys=True) + "\n")
        return Receipt(doc["uuid"], sink.name, "dead_letter", self.retries)


def notify(event: Event, sinks: list[Sink] | Notifier) -> list[Receipt]:
    notifier = sinks if isinstance(sinks, Notifier) else Notifier(sinks)
    return notifier.notify(event)
