"""Modbus-TCP and MQTT codecs: identity round trips, prefix safety, fixed byte strings."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cablemon.net.errors import IncompleteFrame, MalformedPacket
from cablemon.net.modbus import (
    ILLEGAL_ADDRESS,
    ILLEGAL_FUNCTION,
    READ_HOLDING,
    ModbusClient,
    ModbusError,
    ModbusFrame,
    ModbusServerCore,
    modbus_decode,
    modbus_encode,
    read_request,
)
from cablemon.net.mqtt import (
    Connack,
    Connect,
    Disconnect,
    PingReq,
    PingResp,
    Puback,
    Publish,
    StreamDecoder,
    Suback,
    Subscribe,
    Will,
    encode_varint,
    mqtt_decode,
    mqtt_encode,
    topic_matches,
    valid_topic_filter,
)
from cablemon.net.transport import LoopbackModbus

PROPERTY_EXAMPLES = 10_000


def decodable_prefixes(decode, raw: bytes) -> list[int]:
    """Lengths of strict prefixes of ``raw`` that do not report IncompleteFrame with a positive count."""
    bad = []
    for cut in range(len(raw)):
        try:
            decode(raw[:cut])
        except IncompleteFrame as exc:
            if exc.needed <= 0:
                bad.append(cut)
        except Exception:  # noqa: BLE001 - anything else on a valid prefix is a failure
            bad.append(cut)
        else:
            bad.append(cut)
    return bad

u16 = st.integers(0, 0xFFFF)
pid = st.integers(1, 0xFFFF)
# a fixed alphabet keeps generation cheap and still covers 1-, 2-, 3- and 4-byte UTF-8
ALPHABET = "az09-_ .$/é€😀"
text = st.text(ALPHABET + "+#", max_size=12)
level = st.text(ALPHABET.replace("/", ""), min_size=1, max_size=6)
topic = st.lists(level, min_size=1, max_size=4).map("/".join)
filters = st.lists(st.one_of(level, st.just("+")), min_size=1, max_size=4).flatmap(
    lambda lv: st.sampled_from(["/".join(lv), "/".join(lv) + "/#", "#"])
)
payload = st.binary(max_size=40)

modbus_frames = st.builds(
    ModbusFrame,
    transaction_id=u16,
    unit_id=st.integers(0, 0xFF),
    function=st.integers(0, 0xFF),
    payload=st.binary(max_size=252),
    protocol_id=u16,
)

publishes = st.one_of(
    st.builds(Publish, topic=topic, payload=payload, qos=st.just(0), packet_id=st.none(), retain=st.booleans()),
    st.builds(Publish, topic=topic, payload=payload, qos=st.just(1), packet_id=pid, dup=st.booleans(), retain=st.booleans()),
)
connects = st.builds(
    Connect,
    client_id=text,
    keep_alive=u16,
    clean_session=st.booleans(),
    will=st.none() | st.builds(Will, topic=topic, message=payload, qos=st.integers(0, 2), retain=st.booleans()),
    username=st.none(),
    password=st.none(),
) | st.builds(
    Connect,
    client_id=text,
    keep_alive=u16,
    username=text,
    password=st.none() | st.binary(max_size=16),
)
packets = st.one_of(
    publishes,
    connects,
    st.builds(Connack, return_code=st.integers(0, 5), session_present=st.booleans()),
    st.builds(Puback, packet_id=pid),
    st.builds(Subscribe, packet_id=pid, topics=st.lists(st.tuples(filters, st.integers(0, 2)), min_size=1, max_size=3).map(tuple)),
    st.builds(Suback, packet_id=pid, return_codes=st.lists(st.sampled_from([0, 1, 2, 0x80]), min_size=1, max_size=4).map(tuple)),
    st.just(PingReq()),
    st.just(PingResp()),
    st.just(Disconnect()),
)


# Modbus


def test_mbap_read_request_example():
    frame = ModbusFrame(transaction_id=1, unit_id=1, function=READ_HOLDING, payload=read_request(0, 10))
    assert modbus_encode(frame) == bytes.fromhex("00 01 00 00 00 06 01 03 00 00 00 0A")


@settings(max_examples=PROPERTY_EXAMPLES)
@given(modbus_frames, st.binary(max_size=8))
def test_modbus_round_trip_and_prefix_safety(frame, trailing):
    raw = modbus_encode(frame)
    decoded, used = modbus_decode(raw + trailing)
    assert decoded == frame and used == len(raw)
    assert decodable_prefixes(modbus_decode, raw) == []


@given(st.binary(max_size=40))
def test_modbus_decode_garbage_is_contained(data):
    try:
        frame, used = modbus_decode(data)
    except (IncompleteFrame, MalformedPacket):
        return
    assert modbus_encode(frame) == data[:used]


def test_modbus_length_field_out_of_range():
    with pytest.raises(MalformedPacket):
        modbus_decode(bytes.fromhex("0001 0000 0001 01"))


class _Regs:
    def __init__(self):
        self.values = list(range(16))

    def read_holding(self, address, count):
        if address + count > len(self.values):
            raise ModbusError(ILLEGAL_ADDRESS)
        return self.values[address : address + count]

    def write_register(self, address, value):
        if address >= len(self.values):
            raise ModbusError(ILLEGAL_ADDRESS)
        self.values[address] = value


def test_modbus_client_server_over_loopback():
    regs = _Regs()
    client = ModbusClient(LoopbackModbus(ModbusServerCore(regs)))
    assert client.read_holding(1, 0, 16) == list(range(16))
    client.write_register(1, 3, 0xBEEF)
    assert client.read_holding(1, 3, 1) == [0xBEEF]
    with pytest.raises(ModbusError) as exc:
        client.read_holding(1, 10, 10)
    assert exc.value.code == ILLEGAL_ADDRESS


def test_modbus_unsupported_function():
    core = ModbusServerCore(_Regs())
    resp = core.handle(ModbusFrame(7, 1, 0x10, b"\x00\x00\x00\x01"))
    assert resp.is_exception and resp.payload == bytes([ILLEGAL_FUNCTION]) and resp.transaction_id == 7


def test_modbus_server_feed_handles_split_frames():
    core = ModbusServerCore(_Regs())
    raw = modbus_encode(ModbusFrame(1, 1, READ_HOLDING, read_request(0, 2))) * 2
    buf = bytearray(raw[:5])
    assert core.feed(buf) == b""
    buf += raw[5:]
    out = core.feed(buf)
    assert buf == bytearray() and out.count(bytes.fromhex("0001 0000 0007 01 03 04")) == 2


# MQTT


def test_publish_example_header():
    raw = mqtt_encode(Publish("mine/a/circuit/2/events", bytes(10)))
    assert raw[0] == 0x30
    # 2-byte length prefix + 23-byte topic + 10-byte payload
    assert raw[1] == 2 + len("mine/a/circuit/2/events") + 10 == 35
    assert len(raw) == 2 + 35


@pytest.mark.parametrize(
    "n,encoded",
    [(0, "00"), (127, "7f"), (128, "8001"), (16383, "ff7f"), (16384, "808001"), (268_435_455, "ffffff7f")],
)
def test_varint_boundaries(n, encoded):
    assert encode_varint(n) == bytes.fromhex(encoded)


def test_varint_out_of_range():
    with pytest.raises(ValueError):
        encode_varint(268_435_456)


@settings(max_examples=PROPERTY_EXAMPLES)
@given(packets, st.binary(max_size=8))
def test_mqtt_round_trip_and_prefix_safety(packet, trailing):
    raw = mqtt_encode(packet)
    decoded, used = mqtt_decode(raw + trailing)
    assert decoded == packet and used == len(raw)
    assert decodable_prefixes(mqtt_decode, raw) == []


@given(st.lists(packets, min_size=1, max_size=5), st.lists(st.integers(1, 64), min_size=1, max_size=10))
def test_stream_decoder_any_split(pkts, chunks):
    raw = b"".join(mqtt_encode(p) for p in pkts)
    dec = StreamDecoder()
    out, pos, k = [], 0, 0
    while pos < len(raw):
        step = chunks[k % len(chunks)]
        out += dec.feed(raw[pos : pos + step])
        pos, k = pos + step, k + 1
    assert out == pkts and not dec.buffer


@given(st.binary(max_size=60))
def test_mqtt_decode_garbage_is_contained(data):
    try:
        pkt, used = mqtt_decode(data)
    except (IncompleteFrame, MalformedPacket):
        return
    assert used <= len(data)


@pytest.mark.parametrize(
    "raw",
    [
        "3600",  # QoS 3
        "3400",  # QoS 2
        "3805000161",  # DUP on QoS 0
        "820000",  # SUBSCRIBE without filters, after pid would be missing
        "40020000",  # PUBACK is fine; flip reserved flags next
        "41020001",
        "c0ffffffff01",  # remaining length over four bytes
        "f000",  # reserved packet type 15
    ],
)
def test_mqtt_malformed(raw):
    data = bytes.fromhex(raw)
    if raw == "40020000":
        assert mqtt_decode(data)[0] == Puback(0)
        return
    with pytest.raises(MalformedPacket):
        mqtt_decode(data)


def test_publish_rejects_wildcards_and_bad_qos():
    with pytest.raises(ValueError):
        mqtt_encode(Publish("a/+/b"))
    with pytest.raises(ValueError):
        Publish("a", qos=1)
    with pytest.raises(ValueError):
        Publish("a", qos=2, packet_id=1)


@pytest.mark.parametrize(
    "flt,topic,match",
    [
        ("mine/+/circuit/+/events", "mine/a/circuit/2/events", True),
        ("mine/+/circuit/+/events", "mine/a/circuit/2/kpi", False),
        ("mine/#", "mine", True),
        ("mine/#", "mine/a/b", True),
        ("+", "a/b", False),
        ("#", "$SYS/x", False),
        ("+/x", "/x", True),
    ],
)
def test_topic_matching(flt, topic, match):
    assert valid_topic_filter(flt)
    assert topic_matches(flt, topic) is match


@pytest.mark.parametrize("flt", ["", "a/#/b", "a+", "a/b#"])
def test_invalid_filters(flt):
    assert not valid_topic_filter(flt)
