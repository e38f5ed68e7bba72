"""Sans-IO MQTT broker core plus a threaded TCP front end.

The core maps (connection, inbound packet) to a list of (connection, outbound
packet). QoS 1 deliveries to subscribers stay in flight until PUBACK and are
resent with DUP=1 by :meth:`BrokerCore.tick`.

Run standalone with ``python -m cablemon.net.broker --port 1883``.
"""

from __future__ import annotations

import argparse
import logging
import socket
import socketserver
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import MalformedPacket
from .mqtt import (
    SUBACK_FAILURE,
    Connack,
    ConnackCode,
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
    topic_matches,
)

log = logging.getLogger(__name__)

Outbound = list[tuple[int, Packet]]


@dataclass
class _Session:
    client_id: str = ""
    connected: bool = False
    subscriptions: dict[str, int] = field(default_factory=dict)
    next_pid: int = 1
    inflight: "OrderedDict[int, tuple[Publish, float]]" = field(default_factory=OrderedDict)

    def alloc_pid(self) -> int:
        for _ in range(0xFFFF):
            pid = self.next_pid
            self.next_pid = pid % 0xFFFF + 1
            if pid not in self.inflight:
                return pid
        raise RuntimeError("no free packet identifiers")


class ProtocolViolation(Exception):
    """The connection must be closed."""


class BrokerCore:
    def __init__(self, retry_s: float = 2.0, max_inflight: int = 1000):
        self.retry_s = retry_s
        self.max_inflight = max_inflight
        self.sessions: dict[int, _Session] = {}
        self.lock = threading.RLock()
        self.dropped = 0

    def open(self, conn: int) -> None:
        with self.lock:
            self.sessions[conn] = _Session()

    def close(self, conn: int) -> None:
        with self.lock:
            self.sessions.pop(conn, None)

    def receive(self, conn: int, pkt: Packet, now: float = 0.0) -> Outbound:
        """Handle one inbound packet. Raises :class:`ProtocolViolation` to drop the connection."""
        with self.lock:
            s = self.sessions.get(conn)
            if s is None:
                raise ProtocolViolation("unknown connection")
            if not s.connected:
                if not isinstance(pkt, Connect):
                    raise ProtocolViolation("first packet must be CONNECT")
                if pkt.will is not None and pkt.will.qos == 2:
                    # QoS 2 is outside the supported subset
                    return [(conn, Connack(ConnackCode.SERVER_UNAVAILABLE))]
                s.client_id = pkt.client_id
                s.connected = True
                return [(conn, Connack(ConnackCode.ACCEPTED))]
            if isinstance(pkt, Connect):
                raise ProtocolViolation("second CONNECT")
            if isinstance(pkt, Publish):
                out: Outbound = []
                if pkt.qos == 1:
                    out.append((conn, Puback(pkt.packet_id)))
                out.extend(self._fan_out(pkt, now))
                return out
            if isinstance(pkt, Puback):
                s.inflight.pop(pkt.packet_id, None)
                return []
            if isinstance(pkt, Subscribe):
                codes = []
                for flt, q in pkt.topics:
                    if q > 1:
                        codes.append(SUBACK_FAILURE)
                        continue
                    s.subscriptions[flt] = q
                    codes.append(q)
                return [(conn, Suback(pkt.packet_id, tuple(codes)))]
            if isinstance(pkt, PingReq):
                return [(conn, PingResp())]
            if isinstance(pkt, Disconnect):
                raise ProtocolViolation("client disconnected")
            raise ProtocolViolation(f"unexpected {type(pkt).__name__} from client")

    def _fan_out(self, pkt: Publish, now: float) -> Outbound:
        out: Outbound = []
        for conn, s in self.sessions.items():
            if not s.connected:
                continue
            granted = [q for flt, q in s.subscriptions.items() if topic_matches(flt, pkt.topic)]
            if not granted:
                continue
            qos = min(pkt.qos, max(granted))
            if qos == 0:
                out.append((conn, Publish(pkt.topic, pkt.payload)))
                continue
            if len(s.inflight) >= self.max_inflight:
                # slow subscriber: drop rather than block the publisher
                self.dropped += 1
                continue
            pid = s.alloc_pid()
            msg = Publish(pkt.topic, pkt.payload, 1, pid)
            s.inflight[pid] = (msg, now)
            out.append((conn, msg))
        return out

    def inflight_count(self) -> int:
        """QoS 1 deliveries still waiting for a PUBACK, over all sessions."""
        with self.lock:
            return sum(len(s.inflight) for s in self.sessions.values())

    def tick(self, now: float) -> Outbound:
        """Resend unacknowledged QoS 1 deliveries older than ``retry_s``."""
        out: Outbound = []
        with self.lock:
            for conn, s in self.sessions.items():
                for pid, (msg, sent) in list(s.inflight.items()):
                    if now - sent >= self.retry_s:
                        dup = Publish(msg.topic, msg.payload, 1, pid, dup=True)
                        s.inflight[pid] = (dup, now)
                        out.append((conn, dup))
        return out


class _Handler(socketserver.BaseRequestHandler):
    server: "TcpBroker"

    def handle(self) -> None:
        srv = self.server
        conn = srv.register(self.request)
        decoder = StreamDecoder()
        try:
            while True:
                data = self.request.recv(65536)
                if not data:
                    break
                for pkt in decoder.feed(data):
                    out = srv.core.receive(conn, pkt, srv.clock())
                    srv.dispatch(out)
                    if any(isinstance(p, Connack) and p.return_code for _, p in out):
                        return
        except (MalformedPacket, ProtocolViolation, OSError) as exc:
            log.debug("closing connection %s: %s", conn, exc)
        finally:
            srv.unregister(conn)


class TcpBroker(socketserver.ThreadingTCPServer):
    """The broker core behind a TCP listener, one thread per connection."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], core: BrokerCore | None = None, clock=None, retry_s: float = 2.0):
        super().__init__(address, _Handler)
        self.core = core or BrokerCore(retry_s=retry_s)
        self.clock = clock or time.monotonic
        self._socks: dict[int, socket.socket] = {}
        self._send_locks: dict[int, threading.Lock] = {}
        self._next = 0
        self._reg_lock = threading.Lock()
        self._stop = threading.Event()

    @property
    def port(self) -> int:
        return self.server_address[1]

    def register(self, sock: socket.socket) -> int:
        with self._reg_lock:
            self._next += 1
            conn = self._next
            self._socks[conn] = sock
            self._send_locks[conn] = threading.Lock()
        self.core.open(conn)
        return conn

    def unregister(self, conn: int) -> None:
        self.core.close(conn)
        with self._reg_lock:
            sock = self._socks.pop(conn, None)
            self._send_locks.pop(conn, None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def dispatch(self, out: Outbound) -> None:
        for conn, pkt in out:
            with self._reg_lock:
                sock = self._socks.get(conn)
                lock = self._send_locks.get(conn)
            if sock is None or lock is None:
                continue
            try:
                with lock:
                    sock.sendall(mqtt_encode(pkt))
            except OSError:
                pass

    def start(self) -> "TcpBroker":
        threading.Thread(target=self.serve_forever, daemon=True, name="mqtt-broker").start()
        threading.Thread(target=self._retry_loop, daemon=True, name="mqtt-broker-retry").start()
        return self

    def _retry_loop(self) -> None:
        while not self._stop.wait(self.core.retry_s / 4):
            self.dispatch(self.core.tick(self.clock()))

    def stop(self) -> None:
        self._stop.set()
        self.shutdown()
        self.server_close()


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description="Minimal MQTT 3.1.1 broker (QoS 0/1).")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=1883)
    args = ap.parse_args(argv)
    broker = TcpBroker((args.host, args.port))
    print(f"listening {args.host}:{broker.port}", flush=True)
    broker.start()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        broker.stop()


if __name__ == "__main__":
    main()
