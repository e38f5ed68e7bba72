"""Sans-IO MQTT client core and a blocking TCP client built on it."""

from __future__ import annotations

import logging
import socket
import threading
import time
from collections import OrderedDict
from collections.abc import Callable

from .errors import MalformedPacket
from .mqtt import (
    SUBACK_FAILURE,
    Connack,
    Connect,
    Disconnect,
    Packet,
    PingReq,
    PingResp,
    Puback,
    Publish,
    StreamDecoder,
    Suback,
    Subscribe,
    mqtt_encode,
    valid_topic_filter,
    valid_topic_name,
)

log = logging.getLogger(__name__)

MessageHandler = Callable[[Publish], None]


class SubscriptionRefused(Exception):
    pass


class ClientCore:
    """Session state of one MQTT client; every method returns packets to send.

    QoS 1 publishes stay in flight until PUBACK; :meth:`tick` resends those
    older than ``retry_s`` with DUP=1. Incoming QoS 1 publishes are
    acknowledged and handed to ``on_message`` (duplicates included: dedup is
    the application's job, keyed by its own idempotency ids).
    """

    def __init__(self, client_id: str, on_message: MessageHandler | None = None, retry_s: float = 2.0, keep_alive: int = 60):
        self.client_id = client_id
        self.on_message = on_message
        self.retry_s = retry_s
        self.keep_alive = keep_alive
        self.connected = False
        self.refused_code: int | None = None
        self.inflight: "OrderedDict[int, tuple[Publish, float]]" = OrderedDict()
        self.suback: dict[int, tuple[int, ...]] = {}
        self._next_pid = 1
        self.retransmissions = 0

    def _pid(self) -> int:
        for _ in range(0xFFFF):
            pid = self._next_pid
            self._next_pid = pid % 0xFFFF + 1
            if pid not in self.inflight and pid not in self.suback:
                return pid
        raise RuntimeError("no free packet identifiers")

    def connect(self) -> list[Packet]:
        return [Connect(self.client_id, self.keep_alive)]

    def publish(self, topic: str, payload: bytes, qos: int = 1, now: float = 0.0) -> tuple[int | None, list[Packet]]:
        if qos not in (0, 1):
            raise ValueError("only QoS 0 and 1 are supported")
        if not valid_topic_name(topic):
            raise ValueError(f"invalid topic name {topic!r}")
        if qos == 0:
            return None, [Publish(topic, payload)]
        pid = self._pid()
        msg = Publish(topic, payload, 1, pid)
        self.inflight[pid] = (msg, now)
        return pid, [msg]

    def subscribe(self, flt: str, qos: int = 1) -> tuple[int, list[Packet]]:
        if not valid_topic_filter(flt):
            raise ValueError(f"invalid topic filter {flt!r}")
        pid = self._pid()
        self.suback[pid] = ()
        return pid, [Subscribe(pid, ((flt, qos),))]

    def receive(self, pkt: Packet) -> list[Packet]:
        if isinstance(pkt, Connack):
            if pkt.return_code:
                self.refused_code = pkt.return_code
            else:
                self.connected = True
            return []
        if isinstance(pkt, Puback):
            self.inflight.pop(pkt.packet_id, None)
            return []
        if isinstance(pkt, Suback):
            self.suback[pkt.packet_id] = pkt.return_codes
            return []
        if isinstance(pkt, Publish):
            if self.on_message is not None:
                self.on_message(pkt)
            return [Puback(pkt.packet_id)] if pkt.qos == 1 else []
        if isinstance(pkt, PingResp):
            return []
        raise MalformedPacket(f"unexpected {type(pkt).__name__} from broker")

    def tick(self, now: float) -> list[Packet]:
        out: list[Packet] = []
        for pid, (msg, sent) in list(self.inflight.items()):
            if now - sent >= self.retry_s:
                dup = Publish(msg.topic, msg.payload, 1, pid, dup=True)
                self.inflight[pid] = (dup, now)
                self.retransmissions += 1
                out.append(dup)
        return out

    def ping(self) -> list[Packet]:
        return [PingReq()]

    def disconnect(self) -> list[Packet]:
        self.connected = False
        return [Disconnect()]


class TcpMqttClient:
    """Blocking client: a reader thread feeds the core, a timer drives retransmission."""

    def __init__(
        self,
        client_id: str,
        host: str,
        port: int,
        on_message: MessageHandler | None = None,
        retry_s: float = 2.0,
        timeout: float = 5.0,
    ):
        self.core = ClientCore(client_id, on_message, retry_s)
        self.timeout = timeout
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(None)
        self._lock = threading.RLock()
        self._changed = threading.Condition(self._lock)
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True, name=f"mqtt-{client_id}")
        self._reader.start()
        self._send(self.core.connect())
        with self._changed:
            if not self._changed.wait_for(lambda: self.core.connected or self.core.refused_code is not None, timeout):
                raise TimeoutError("no CONNACK")
        if self.core.refused_code is not None:
            raise ConnectionRefusedError(f"CONNACK return code {self.core.refused_code}")
        threading.Thread(target=self._retry_loop, daemon=True).start()

    def _send(self, pkts: list[Packet]) -> None:
        data = b"".join(mqtt_encode(p) for p in pkts)
        if data:
            with self._lock:
                self.sock.sendall(data)

    def _read_loop(self) -> None:
        decoder = StreamDecoder()
        try:
            while not self._closed.is_set():
                data = self.sock.recv(65536)
                if not data:
                    break
                for pkt in decoder.feed(data):
                    with self._changed:
                        replies = self.core.receive(pkt)
                        self._changed.notify_all()
                    self._send(replies)
        except (OSError, MalformedPacket) as exc:
            log.debug("mqtt reader stopped: %s", exc)
        finally:
            self._closed.set()
            with self._changed:
                self._changed.notify_all()

    def _retry_loop(self) -> None:
        while not self._closed.wait(self.core.retry_s / 4):
            with self._lock:
                pkts = self.core.tick(time.monotonic())
            try:
                self._send(pkts)
            except OSError:
                return

    def publish(self, topic: str, payload: bytes, qos: int = 1, wait: bool = False) -> int | None:
        with self._lock:
            pid, pkts = self.core.publish(topic, payload, qos, time.monotonic())
        self._send(pkts)
        if wait and pid is not None:
            with self._changed:
                if not self._changed.wait_for(lambda: pid not in self.core.inflight or self._closed.is_set(), self.timeout):
                    raise TimeoutError("no PUBACK")
        return pid

    def subscribe(self, flt: str, qos: int = 1) -> int:
        with self._lock:
            pid, pkts = self.core.subscribe(flt, qos)
        self._send(pkts)
        with self._changed:
            if not self._changed.wait_for(lambda: self.core.suback.get(pid), self.timeout):
                raise TimeoutError("no SUBACK")
            codes = self.core.suback.pop(pid)
        if codes[0] == SUBACK_FAILURE:
            raise SubscriptionRefused(flt)
        return codes[0]

    def pending(self) -> int:
        with self._lock:
            return len(self.core.inflight)

    def close(self) -> None:
        try:
            self._send(self.core.disconnect())
        except OSError:
            pass
        self._closed.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def mqtt_publish(client, topic: str, payload: bytes, qos: int = 1):
    return client.publish(topic, payload, qos)


def mqtt_subscribe(client, flt: str, qos: int = 1):
    return client.subscribe(flt, qos)
