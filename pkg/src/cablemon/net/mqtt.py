"""MQTT 3.1.1 subset codec: QoS 0 and 1, no retained-message store.

``mqtt_decode`` never returns a packet from a strict prefix of a valid
encoding: it raises :class:`IncompleteFrame` with the missing byte count.
Anything that cannot become valid raises :class:`MalformedPacket`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

from .errors import IncompleteFrame, MalformedPacket

PROTOCOL_NAME = "MQTT"
PROTOCOL_LEVEL = 4
MAX_REMAINING = 268_435_455


class PacketType(IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    PUBACK = 4
    SUBSCRIBE = 8
    SUBACK = 9
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


class ConnackCode(IntEnum):
    ACCEPTED = 0
    UNACCEPTABLE_PROTOCOL = 1
    IDENTIFIER_REJECTED = 2
    SERVER_UNAVAILABLE = 3
    BAD_CREDENTIALS = 4
    NOT_AUTHORIZED = 5


SUBACK_FAILURE = 0x80


@dataclass(frozen=True)
class Will:
    topic: str
    message: bytes
    qos: int = 0
    retain: bool = False


@dataclass(frozen=True)
class Connect:
    client_id: str
    keep_alive: int = 60
    clean_session: bool = True
    will: Will | None = None
    username: str | None = None
    password: bytes | None = None


@dataclass(frozen=True)
class Connack:
    return_code: int = 0
    session_present: bool = False


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    packet_id: int | None = None
    dup: bool = False
    retain: bool = False

    def __post_init__(self) -> None:
        if self.qos not in (0, 1):
            raise ValueError("only QoS 0 and 1 are supported")
        if (self.qos > 0) != (self.packet_id is not None):
            raise ValueError("packet_id is required exactly for QoS 1")
        if self.qos == 0 and self.dup:
            raise ValueError("DUP must be 0 for QoS 0")


@dataclass(frozen=True)
class Puback:
    packet_id: int


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    topics: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class Suback:
    packet_id: int
    return_codes: tuple[int, ...]


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Union[Connect, Connack, Publish, Puback, Subscribe, Suback, PingReq, PingResp, Disconnect]


# topic names and filters


def valid_topic_name(topic: str) -> bool:
    return 0 < len(topic.encode()) <= 0xFFFF and "+" not in topic and "#" not in topic and "\x00" not in topic


def valid_topic_filter(flt: str) -> bool:
    if not flt or "\x00" in flt or len(flt.encode()) > 0xFFFF:
        return False
    levels = flt.split("/")
    for i, lvl in enumerate(levels):
        if "#" in lvl and (lvl != "#" or i != len(levels) - 1):
            return False
        if "+" in lvl and lvl != "+":
            return False
    return True


def topic_matches(flt: str, topic: str) -> bool:
    """3.1.1 wildcard matching; ``$``-topics are not matched by leading wildcards."""
    f_levels = flt.split("/")
    t_levels = topic.split("/")
    if topic.startswith("$") and f_levels[0] in ("+", "#"):
        return False
    for i, f in enumerate(f_levels):
        if f == "#":
            return True
        if i >= len(t_levels):
            return False
        if f != "+" and f != t_levels[i]:
            return False
    return len(f_levels) == len(t_levels)


# primitives


def encode_varint(n: int) -> bytes:
    if not 0 <= n <= MAX_REMAINING:
        raise ValueError("remaining length out of range")
    out = bytearray()
    while True:
        byte, n = n % 128, n // 128
        out.append(byte | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long")
    return struct.pack(">H", len(raw)) + raw


def _bin(b: bytes) -> bytes:
    if len(b) > 0xFFFF:
        raise ValueError("binary field too long")
    return struct.pack(">H", len(b)) + b


class _Reader:
    def __init__(self, body: bytes):
        self.body = body
        self.pos = 0

    def remaining(self) -> int:
        return len(self.body) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise MalformedPacket("field runs past the end of the packet")
        out = self.body[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def binary(self) -> bytes:
        return self.take(self.u16())

    def string(self) -> str:
        raw = self.binary()
        try:
            s = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedPacket("invalid UTF-8 string") from None
        if "\x00" in s:
            raise MalformedPacket("string contains U+0000")
        return s

    def done(self) -> None:
        if self.remaining():
            raise MalformedPacket("trailing bytes in packet")


# encoding


def _fixed(ptype: PacketType, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_varint(len(body)) + body


def mqtt_encode(p: Packet) -> bytes:
    if isinstance(p, Connect):
        flags = 0x02 if p.clean_session else 0
        payload = _str(p.client_id)
        if p.will is not None:
            flags |= 0x04 | (p.will.qos << 3) | (0x20 if p.will.retain else 0)
            payload += _str(p.will.topic) + _bin(p.will.message)
        if p.username is not None:
            flags |= 0x80
            payload += _str(p.username)
        if p.password is not None:
            if p.username is None:
                raise ValueError("password requires a username")
            flags |= 0x40
            payload += _bin(p.password)
        body = _str(PROTOCOL_NAME) + bytes([PROTOCOL_LEVEL, flags]) + struct.pack(">H", p.keep_alive) + payload
        return _fixed(PacketType.CONNECT, 0, body)
    if isinstance(p, Connack):
        return _fixed(PacketType.CONNACK, 0, bytes([1 if p.session_present else 0, p.return_code]))
    if isinstance(p, Publish):
        if not valid_topic_name(p.topic):
            raise ValueError(f"invalid topic name {p.topic!r}")
        flags = (0x08 if p.dup else 0) | (p.qos << 1) | (0x01 if p.retain else 0)
        body = _str(p.topic) + (struct.pack(">H", p.packet_id) if p.qos else b"") + p.payload
        return _fixed(PacketType.PUBLISH, flags, body)
    if isinstance(p, Puback):
        return _fixed(PacketType.PUBACK, 0, struct.pack(">H", p.packet_id))
    if isinstance(p, Subscribe):
        if not p.topics:
            raise ValueError("SUBSCRIBE needs at least one filter")
        body = struct.pack(">H", p.packet_id) + b"".join(_str(f) + bytes([q]) for f, q in p.topics)
        return _fixed(PacketType.SUBSCRIBE, 0x02, body)
    if isinstance(p, Suback):
        return _fixed(PacketType.SUBACK, 0, struct.pack(">H", p.packet_id) + bytes(p.return_codes))
    if isinstance(p, PingReq):
        return _fixed(PacketType.PINGREQ, 0, b"")
    if isinstance(p, PingResp):
        return _fixed(PacketType.PINGRESP, 0, b"")
    if isinstance(p, Disconnect):
        return _fixed(PacketType.DISCONNECT, 0, b"")
    raise TypeError(f"not an MQTT packet: {p!r}")


# decoding

_FIXED_FLAGS = {
    PacketType.CONNECT: 0,
    PacketType.CONNACK: 0,
    PacketType.PUBACK: 0,
    PacketType.SUBSCRIBE: 0x02,
    PacketType.SUBACK: 0,
    PacketType.PINGREQ: 0,
    PacketType.PINGRESP: 0,
    PacketType.DISCONNECT: 0,
}


def _header(buf: bytes) -> tuple[PacketType, int, int, int]:
    """(type, flags, remaining length, header size), validating what is already present."""
    if not buf:
        raise IncompleteFrame(2)
    try:
        ptype = PacketType(buf[0] >> 4)
    except ValueError:
        raise MalformedPacket(f"unsupported packet type {buf[0] >> 4}") from None
    flags = buf[0] & 0x0F
    if ptype is PacketType.PUBLISH:
        qos = (flags >> 1) & 0x03
        if qos > 1:
            raise MalformedPacket("QoS 2 is not supported" if qos == 2 else "invalid QoS 3")
        if qos == 0 and flags & 0x08:
            raise MalformedPacket("DUP set on a QoS 0 publish")
    elif flags != _FIXED_FLAGS[ptype]:
        raise MalformedPacket(f"reserved flags 0x{flags:X} on {ptype.name}")
    value, mult = 0, 1
    for i in range(1, 5):
        if i >= len(buf):
            raise IncompleteFrame(1)
        byte = buf[i]
        value += (byte & 0x7F) * mult
        if not byte & 0x80:
            return ptype, flags, value, i + 1
        mult *= 128
    raise MalformedPacket("remaining length longer than 4 bytes")


def mqtt_decode(buf: bytes) -> tuple[Packet, int]:
    """Decode one packet from the front of ``buf``. Returns (packet, bytes consumed)."""
    buf = bytes(buf)
    ptype, flags, rlen, hlen = _header(buf)
    total = hlen + rlen
    if len(buf) < total:
        raise IncompleteFrame(total - len(buf))
    r = _Reader(buf[hlen:total])
    return _body(ptype, flags, r), total


def _body(ptype: PacketType, flags: int, r: _Reader) -> Packet:
    if ptype is PacketType.CONNECT:
        if r.string() != PROTOCOL_NAME:
            raise MalformedPacket("bad protocol name")
        level = r.u8()
        if level != PROTOCOL_LEVEL:
            raise MalformedPacket(f"unsupported protocol level {level}")
        cflags = r.u8()
        if cflags & 0x01:
            raise MalformedPacket("reserved connect flag set")
        keep_alive = r.u16()
        client_id = r.string()
        will = None
        will_qos = (cflags >> 3) & 0x03
        if cflags & 0x04:
            if will_qos == 3:
                raise MalformedPacket("invalid will QoS")
            topic = r.string()
            will = Will(topic, r.binary(), will_qos, bool(cflags & 0x20))
        elif will_qos or cflags & 0x20:
            raise MalformedPacket("will QoS/retain set without a will")
        username = r.string() if cflags & 0x80 else None
        if cflags & 0x40 and not cflags & 0x80:
            raise MalformedPacket("password flag without username")
        password = r.binary() if cflags & 0x40 else None
        r.done()
        return Connect(client_id, keep_alive, bool(cflags & 0x02), will, username, password)
    if ptype is PacketType.CONNACK:
        ack = r.u8()
        code = r.u8()
        r.done()
        if ack & 0xFE:
            raise MalformedPacket("reserved CONNACK flags set")
        return Connack(code, bool(ack & 0x01))
    if ptype is PacketType.PUBLISH:
        qos = (flags >> 1) & 0x03
        topic = r.string()
        if not valid_topic_name(topic):
            raise MalformedPacket(f"invalid topic name {topic!r}")
        pid = r.u16() if qos else None
        if pid == 0:
            raise MalformedPacket("packet id 0")
        payload = r.take(r.remaining())
        return Publish(topic, payload, qos, pid, bool(flags & 0x08), bool(flags & 0x01))
    if ptype is PacketType.PUBACK:
        pid = r.u16()
        r.done()
        return Puback(pid)
    if ptype is PacketType.SUBSCRIBE:
        pid = r.u16()
        topics = []
        while r.remaining():
            flt = r.string()
            q = r.u8()
            if q & 0xFC:
                raise MalformedPacket("reserved bits in requested QoS")
            if not valid_topic_filter(flt):
                raise MalformedPacket(f"invalid topic filter {flt!r}")
            topics.append((flt, q))
        if not topics:
            raise MalformedPacket("SUBSCRIBE without filters")
        return Subscribe(pid, tuple(topics))
    if ptype is PacketType.SUBACK:
        pid = r.u16()
        codes = tuple(r.take(r.remaining()))
        if not codes or any(c not in (0, 1, 2, SUBACK_FAILURE) for c in codes):
            raise MalformedPacket("bad SUBACK return codes")
        return Suback(pid, codes)
    r.done()
    return {PacketType.PINGREQ: PingReq, PacketType.PINGRESP: PingResp, PacketType.DISCONNECT: Disconnect}[ptype]()


@dataclass
class StreamDecoder:
    """Accumulates bytes and yields complete packets."""

    buffer: bytearray = field(default_factory=bytearray)

    def feed(self, data: bytes) -> list[Packet]:
        self.buffer += data
        out = []
        while self.buffer:
            try:
                pkt, used = mqtt_decode(bytes(self.buffer))
            except IncompleteFrame:
                break
            del self.buffer[:used]
            out.append(pkt)
        return out
