"""Modbus-TCP subset: MBAP framing, read holding registers (0x03), write single register (0x06).

The codec and :class:`ModbusServerCore` do no I/O. Transports live in
:mod:`cablemon.net.transport`.
"""

from __future__ import annotations

import itertools
import struct
import threading
from dataclasses import dataclass
from typing import Protocol

from .errors import IncompleteFrame, MalformedPacket

READ_HOLDING = 0x03
WRITE_SINGLE = 0x06
SUPPORTED = (READ_HOLDING, WRITE_SINGLE)

ILLEGAL_FUNCTION = 0x01
ILLEGAL_ADDRESS = 0x02

MBAP_LEN = 7
MAX_PDU = 253
MAX_READ = 125


@dataclass(frozen=True)
class ModbusFrame:
    transaction_id: int
    unit_id: int
    function: int
    payload: bytes = b""
    protocol_id: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.transaction_id <= 0xFFFF or not 0 <= self.protocol_id <= 0xFFFF:
            raise ValueError("transaction_id and protocol_id are 16-bit")
        if not 0 <= self.unit_id <= 0xFF or not 0 <= self.function <= 0xFF:
            raise ValueError("unit_id and function are 8-bit")
        if 1 + len(self.payload) > MAX_PDU:
            raise ValueError("PDU too long")

    @property
    def length(self) -> int:
        """MBAP length field: unit id + function + payload."""
        return 2 + len(self.payload)

    @property
    def is_exception(self) -> bool:
        return bool(self.function & 0x80)


def modbus_encode(frame: ModbusFrame) -> bytes:
    return (
        struct.pack(">HHHBB", frame.transaction_id, frame.protocol_id, frame.length, frame.unit_id, frame.function)
        + frame.payload
    )


def modbus_decode(buf: bytes) -> tuple[ModbusFrame, int]:
    """Decode one frame from the front of ``buf``. Returns (frame, bytes consumed)."""
    if len(buf) < 6:
        raise IncompleteFrame(6 - len(buf))
    tid, pid, length = struct.unpack_from(">HHH", buf)
    if length < 2 or length > MAX_PDU + 1:
        raise MalformedPacket(f"MBAP length {length} out of range")
    total = 6 + length
    if len(buf) < total:
        raise IncompleteFrame(total - len(buf))
    unit, function = buf[6], buf[7]
    return ModbusFrame(tid, unit, function, bytes(buf[8:total]), pid), total


# PDU payload helpers


def read_request(start: int, count: int) -> bytes:
    return struct.pack(">HH", start, count)


def write_request(address: int, value: int) -> bytes:
    return struct.pack(">HH", address, value)


def read_response(values: list[int]) -> bytes:
    return struct.pack(f">B{len(values)}H", 2 * len(values), *values)


def parse_read_response(payload: bytes) -> list[int]:
    if not payload or payload[0] != len(payload) - 1 or payload[0] % 2:
        raise MalformedPacket("bad read-response byte count")
    return list(struct.unpack(f">{payload[0] // 2}H", payload[1:]))


def exception_frame(request: ModbusFrame, code: int) -> ModbusFrame:
    return ModbusFrame(request.transaction_id, request.unit_id, request.function | 0x80, bytes([code]), request.protocol_id)


class ModbusError(Exception):
    """A Modbus exception code raised by a register map or returned by a server."""

    def __init__(self, code: int, message: str = ""):
        super().__init__(message or f"modbus exception 0x{code:02X}")
        self.code = code


class PollTimeout(Exception):
    """No response within the poll deadline."""


class RegisterMap(Protocol):
    def read_holding(self, address: int, count: int) -> list[int]: ...

    def write_register(self, address: int, value: int) -> None: ...


class ModbusServerCore:
    """Request to response for one register map. No I/O."""

    def __init__(self, registers: RegisterMap):
        self.registers = registers

    def handle(self, req: ModbusFrame) -> ModbusFrame:
        if req.protocol_id != 0 or req.function not in SUPPORTED:
            return exception_frame(req, ILLEGAL_FUNCTION)
        if len(req.payload) != 4:
            return exception_frame(req, ILLEGAL_ADDRESS)
        a, b = struct.unpack(">HH", req.payload)
        try:
            if req.function == READ_HOLDING:
                if not 1 <= b <= MAX_READ:
                    raise ModbusError(ILLEGAL_ADDRESS, "quantity out of range")
                values = self.registers.read_holding(a, b)
                return ModbusFrame(req.transaction_id, req.unit_id, req.function, read_response(values))
            self.registers.write_register(a, b)
            return ModbusFrame(req.transaction_id, req.unit_id, req.function, req.payload)
        except ModbusError as exc:
            return exception_frame(req, exc.code)

    def feed(self, buf: bytearray) -> bytes:
        """Consume every complete frame at the front of ``buf``; return the encoded responses."""
        out = bytearray()
        while True:
            try:
                frame, used = modbus_decode(bytes(buf))
            except IncompleteFrame:
                return bytes(out)
            del buf[:used]
            out += modbus_encode(self.handle(frame))


class RequestTransport(Protocol):
    def request(self, data: bytes, timeout: float) -> bytes: ...


class ModbusClient:
    """Blocking request/response client over any :class:`RequestTransport`."""

    def __init__(self, transport: RequestTransport, timeout: float = 1.0):
        self.transport = transport
        self.timeout = timeout
        self._tids = itertools.count(1)
        self._lock = threading.Lock()

    def _call(self, unit: int, function: int, payload: bytes) -> ModbusFrame:
        with self._lock:
            tid = next(self._tids) & 0xFFFF
        req = ModbusFrame(tid, unit, function, payload)
        raw = self.transport.request(modbus_encode(req), self.timeout)
        resp, _ = modbus_decode(raw)
        if resp.transaction_id != tid:
            raise MalformedPacket("transaction id mismatch")
        if resp.is_exception:
            raise ModbusError(resp.payload[0] if resp.payload else 0)
        return resp

    def read_holding(self, unit: int, start: int, count: int) -> list[int]:
        if not 1 <= count <= MAX_READ:
            raise ValueError(f"count must be in [1, {MAX_READ}]")
        resp = self._call(unit, READ_HOLDING, read_request(start, count))
        values = parse_read_response(resp.payload)
        if len(values) != count:
            raise MalformedPacket("register count mismatch")
        return values

    def write_register(self, unit: int, address: int, value: int) -> None:
        self._call(unit, WRITE_SINGLE, write_request(address, value))


def modbus_poll(client: ModbusClient, unit: int, start: int, count: int) -> list[int]:
    return client.read_holding(unit, start, count)
