"""Transports for the protocol cores: in-process loopback and TCP.

The loopback transports still go through the byte codecs, so in-process runs
exercise the same framing as the socket runs. They are synchronous and
deterministic: nothing moves until :meth:`LoopbackMqtt.pump` is called.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from collections import deque
from collections.abc import Callable

from .broker import BrokerCore, ProtocolViolation
from .client import ClientCore, MessageHandler, SubscriptionRefused
from .errors import IncompleteFrame, MalformedPacket
from .modbus import ModbusServerCore, PollTimeout, modbus_decode
from .mqtt import SUBACK_FAILURE, Packet, StreamDecoder, mqtt_encode

# (direction "up" client->broker or "down" broker->client, client id, packet) -> copies to deliver
FaultInjector = Callable[[str, str, Packet], int]


class LoopbackClient:
    def __init__(self, net: "LoopbackMqtt", conn: int, core: ClientCore):
        self.net = net
        self.conn = conn
        self.core = core

    @property
    def client_id(self) -> str:
        return self.core.client_id

    @property
    def connected(self) -> bool:
        return self.core.connected and self.conn in self.net.clients

    def publish(self, topic: str, payload: bytes, qos: int = 1) -> int | None:
        pid, pkts = self.core.publish(topic, payload, qos, self.net.now)
        self.net._up(self, pkts)
        return pid

    def subscribe(self, flt: str, qos: int = 1) -> int:
        pid, pkts = self.core.subscribe(flt, qos)
        self.net._up(self, pkts)
        self.net.pump()
        codes = self.core.suback.pop(pid, ())
        if not codes or codes[0] == SUBACK_FAILURE:
            raise SubscriptionRefused(flt)
        return codes[0]

    def pending(self) -> int:
        return len(self.core.inflight)


class LoopbackMqtt:
    """A broker and its clients wired through in-memory byte queues."""

    def __init__(self, retry_s: float = 2.0, fault: FaultInjector | None = None):
        self.broker = BrokerCore(retry_s=retry_s)
        self.retry_s = retry_s
        self.fault = fault
        self.now = 0.0
        self.clients: dict[int, LoopbackClient] = {}
        self._queue: deque[tuple[str, int, bytes]] = deque()
        self._decoders: dict[tuple[str, int], StreamDecoder] = {}
        self._next = 0
        self.delivered_bytes = 0

    def connect(self, client_id: str, on_message: MessageHandler | None = None) -> LoopbackClient:
        self._next += 1
        conn = self._next
        self.broker.open(conn)
        client = LoopbackClient(self, conn, ClientCore(client_id, on_message, self.retry_s))
        self.clients[conn] = client
        self._up(client, client.core.connect())
        self.pump()
        if not client.core.connected:
            raise ConnectionRefusedError(f"CONNACK return code {client.core.refused_code}")
        return client

    def disconnect(self, client: LoopbackClient) -> None:
        self.clients.pop(client.conn, None)
        self.broker.close(client.conn)

    def _copies(self, direction: str, conn: int, pkt: Packet) -> int:
        if self.fault is None:
            return 1
        client = self.clients.get(conn)
        return self.fault(direction, client.client_id if client else "", pkt)

    def _up(self, client: LoopbackClient, pkts: list[Packet]) -> None:
        for p in pkts:
            for _ in range(self._copies("up", client.conn, p)):
                self._queue.append(("up", client.conn, mqtt_encode(p)))

    def _down(self, out: list[tuple[int, Packet]]) -> None:
        for conn, p in out:
            for _ in range(self._copies("down", conn, p)):
                self._queue.append(("down", conn, mqtt_encode(p)))

    def pump(self, limit: int = 1_000_000) -> int:
        """Deliver queued bytes until nothing is left. Returns the number of packets moved."""
        moved = 0
        while self._queue and moved < limit:
            direction, conn, data = self._queue.popleft()
            if conn not in self.clients:
                continue
            self.delivered_bytes += len(data)
            dec = self._decoders.setdefault((direction, conn), StreamDecoder())
            try:
                pkts = dec.feed(data)
            except MalformedPacket:
                self.disconnect(self.clients[conn])
                continue
            for pkt in pkts:
                moved += 1
                if direction == "up":
                    try:
                        self._down(self.broker.receive(conn, pkt, self.now))
                    except ProtocolViolation:
                        self.disconnect(self.clients[conn])
                        break
                else:
                    client = self.clients[conn]
                    self._up(client, client.core.receive(pkt))
        return moved

    def advance(self, now: float) -> None:
        """Move the clock, run retransmission timers and deliver everything."""
        self.now = now
        self._down(self.broker.tick(now))
        for client in list(self.clients.values()):
            self._up(client, client.core.tick(now))
        self.pump()


class LoopbackModbus:
    """Request transport calling a server core directly. ``stopped`` simulates a dead IMU."""

    def __init__(self, core: ModbusServerCore):
        self.core = core
        self.stopped = False

    def request(self, data: bytes, timeout: float) -> bytes:
        if self.stopped:
            raise PollTimeout(f"no response within {timeout} s")
        return self.core.feed(bytearray(data))


class TcpModbusTransport:
    """One persistent TCP connection; reconnects on the next request after a failure."""

    def __init__(self, host: str, port: int):
        self.address = (host, port)
        self.sock: socket.socket | None = None
        self._lock = threading.Lock()

    def request(self, data: bytes, timeout: float) -> bytes:
        with self._lock:
            try:
                if self.sock is None:
                    self.sock = socket.create_connection(self.address, timeout=timeout)
                self.sock.settimeout(timeout)
                self.sock.sendall(data)
                buf = b""
                while True:
                    try:
                        _, used = modbus_decode(buf)
                        return buf[:used]
                    except IncompleteFrame as inc:
                        chunk = self.sock.recv(max(inc.needed, 256))
                        if not chunk:
                            raise ConnectionError("connection closed")
                        buf += chunk
            except (OSError, ConnectionError) as exc:
                self.close()
                raise PollTimeout(str(exc)) from exc

    def close(self) -> None:
        if self.sock is not None:
            try:
                self.sock.close()
            except OSError:
                pass
            self.sock = None


class _ModbusHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        buf = bytearray()
        core: ModbusServerCore = self.server.core  # type: ignore[attr-defined]
        while True:
            try:
                data = self.request.recv(4096)
            except OSError:
                return
            if not data:
                return
            buf += data
            try:
                out = core.feed(buf)
            except MalformedPacket:
                return
            if out:
                self.request.sendall(out)


class TcpModbusServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], core: ModbusServerCore):
        super().__init__(address, _ModbusHandler)
        self.core = core

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> "TcpModbusServer":
        threading.Thread(target=self.serve_forever, daemon=True, name="modbus-server").start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


__all__ = [
    "FaultInjector",
    "LoopbackClient",
    "LoopbackModbus",
    "LoopbackMqtt",
    "TcpModbusServer",
    "TcpModbusTransport",
]
