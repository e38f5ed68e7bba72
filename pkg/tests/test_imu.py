"""IMU: register image, screening state machine, node behaviour and alert hand-off."""

import struct
from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cablemon.imu.alerts import AlertPusher, push_alert
from cablemon.imu.config import ImuConfig
from cablemon.imu.cycle import SensorInputs, sample_cycle
from cablemon.imu.fsm import FsmState, fsm_step
from cablemon.imu.node import THRESHOLD_BASE, ImuNode
from cablemon.imu.record import Alert, FeatureRecord, FsmLevel, Quality
from cablemon.imu.registers import N_REGISTERS, decode_registers, encode_registers
from cablemon.net.modbus import (
    ILLEGAL_ADDRESS,
    ModbusFrame,
    modbus_decode,
    modbus_encode,
    parse_read_response,
    read_request,
)
from cablemon.sim import Simulator, load_scenario

CFG = ImuConfig("imu-0")
# independent layout: u32 charge, u16 rate, s16 temp, u16 grad, u16 rise, u16 state,
# u16 quality, s32 current, u16 vibration, u32 seq, u32 time, u16 version
LAYOUT = ">IHhHHHHiHIIH"


def oracle_decode(regs):
    raw = struct.unpack(LAYOUT, struct.pack(">16H", *regs))
    charge, rate, temp, grad, rise, state, quality, current, vib, seq, t, version = raw
    assert version == 1
    return {
        "max_charge_pc": float(charge),
        "rate_pps": rate / 10,
        "max_temp_c": temp / 10,
        "max_gradient_c_per_m": grad / 10,
        "max_rise_rate_c_per_min": rise / 10,
        "fsm_state": FsmLevel(state),
        "quality": quality,
        "current_a": current / 100,
        "vibration_rms": vib / 1000,
        "seq": seq,
        "time": float(t),
    }


def on_grid(lo, hi, scale):
    return st.integers(lo, hi).map(lambda k: k / scale)


records = st.builds(
    FeatureRecord,
    imu_id=st.just("imu-0"),
    seq=st.integers(0, 2**32 - 1),
    time=st.integers(0, 2**32 - 1).map(float),
    max_charge_pc=st.integers(0, 2**32 - 1).map(float),
    rate_pps=on_grid(0, 0xFFFF, 10),
    max_temp_c=on_grid(-0x8000, 0x7FFF, 10),
    max_gradient_c_per_m=on_grid(0, 0xFFFF, 10),
    max_rise_rate_c_per_min=on_grid(0, 0xFFFF, 10),
    current_a=on_grid(-(2**31), 2**31 - 1, 100),
    vibration_rms=on_grid(0, 0xFFFF, 1000),
    fsm_state=st.sampled_from(FsmLevel),
    quality=st.integers(0, 0x3E),  # everything except the saturation bit
)


def test_register_examples():
    regs = encode_registers(FeatureRecord("x", 1, 0.0, max_charge_pc=1200.0, max_temp_c=-1.5))
    assert len(regs) == N_REGISTERS
    assert regs[0:2] == [0x0000, 0x04B0]
    assert regs[3] == (-15) & 0xFFFF
    assert decode_registers(regs).max_temp_c == -1.5
    assert regs[15] == 1


@given(records)
def test_register_round_trip(rec):
    regs = encode_registers(rec)
    assert all(0 <= r <= 0xFFFF for r in regs)
    decoded = decode_registers(regs)
    expected = oracle_decode(regs)
    for name, value in expected.items():
        assert getattr(decoded, name) == value == getattr(rec, name)


def test_out_of_range_saturates_and_flags():
    regs = encode_registers(FeatureRecord("x", 1, 0.0, max_temp_c=5000.0, rate_pps=1e9))
    d = decode_registers(regs)
    assert d.max_temp_c == 3276.7 and d.rate_pps == 6553.5
    assert d.quality & Quality.SATURATED


@pytest.mark.parametrize(
    "regs,message",
    [([0] * 15, "expected 16"), ([0] * 15 + [2], "schema version"), ([0] * 6 + [3] + [0] * 8 + [1], "FSM state"),
     ([70000] + [0] * 14 + [1], "16-bit")],
)
def test_decode_rejects_bad_images(regs, message):
    with pytest.raises(ValueError, match=message):
        decode_registers(regs)


def run_fsm(values, field="max_charge_pc", cfg=CFG):
    state, alerts, levels = FsmState(), [], []
    for seq, v in enumerate(values):
        state, alert = fsm_step(state, FeatureRecord("imu-0", seq, float(seq), **{field: v}), cfg)
        levels.append(state.level)
        if alert:
            alerts.append(alert)
    return levels, alerts


def test_three_severe_records_enter_severe_once():
    levels, alerts = run_fsm([1200.0] * 10)
    assert levels[:3] == [FsmLevel.NORMAL, FsmLevel.NORMAL, FsmLevel.SEVERE]
    assert len(alerts) == 1
    a = alerts[0]
    assert (a.entered_state, a.metric, a.value, a.threshold, a.seq) == (FsmLevel.SEVERE, "pd_magnitude_pc", 1200.0, 1000.0, 2)


def test_quiet_records_never_alert():
    levels, alerts = run_fsm([0.0] * 50)
    assert set(levels) == {FsmLevel.NORMAL} and alerts == []


def test_breaches_interrupted_by_a_clear_do_not_escalate():
    levels, alerts = run_fsm([1200.0, 1200.0, 0.0, 1200.0, 1200.0, 0.0])
    assert set(levels) == {FsmLevel.NORMAL} and alerts == []


def test_exit_needs_the_full_clear_debounce():
    levels, _ = run_fsm([1200.0] * 3 + [0.0] * CFG.exit_debounce)
    assert levels[-2] is FsmLevel.SEVERE and levels[-1] is FsmLevel.NORMAL


def test_mixed_run_enters_the_lowest_level_seen():
    levels, alerts = run_fsm([1200.0, 600.0, 1200.0])
    assert levels[-1] is FsmLevel.ATTENTION
    assert alerts[0].metric == "pd_magnitude_pc" and alerts[0].threshold == 500.0


@given(st.lists(st.sampled_from([0.0, 600.0, 1200.0]), max_size=60))
def test_fsm_only_moves_after_debounce(values):
    levels, alerts = run_fsm(values)
    prev = FsmLevel.NORMAL
    for i, level in enumerate(levels):
        if level > prev:
            window = values[max(0, i - CFG.enter_debounce + 1) : i + 1]
            assert len(window) == CFG.enter_debounce and all(v > 500.0 for v in window)
        elif level < prev:
            window = values[max(0, i - CFG.exit_debounce + 1) : i + 1]
            assert len(window) == CFG.exit_debounce
        prev = level
    # one alert per escalation, none on de-escalation
    assert len(alerts) == sum(b > a for a, b in zip([FsmLevel.NORMAL] + levels, levels))
    assert len({a.uuid for a in alerts}) == len(alerts)


def case_study_feed():
    sc = load_scenario(resources.files("cablemon.data").joinpath("case_study.scn").read_text())
    sim = Simulator(sc)
    return sc, sim


def test_case_study_node_reaches_severe_with_expected_features():
    sc, sim = case_study_feed()
    imu = next(c for c in sim.imu_configs if c.position_m == 400)
    node = ImuNode(imu)
    recs = [node.tick(sim.inputs(imu.id, sc.start_time + t)) for t in range(1, 31)]
    late = recs[-1]
    assert late.max_charge_pc == pytest.approx(1200, rel=0.05)
    assert late.rate_pps == pytest.approx(12, rel=0.05)
    assert late.fsm_state is FsmLevel.SEVERE
    assert [a.entered_state for a in node.alerts] == [FsmLevel.SEVERE]
    # the register image a poller reads matches the latest record
    request = modbus_encode(ModbusFrame(7, imu.unit_id, 0x03, read_request(0, 16)))
    frame, _ = modbus_decode(node.modbus.feed(bytearray(request)))
    assert decode_registers(parse_read_response(frame.payload)).seq == late.seq


def test_quiet_point_records_zero_charge_and_ambient():
    sc, sim = case_study_feed()
    imu = next(c for c in sim.imu_configs if c.position_m == 1200)
    rec = ImuNode(imu).tick(sim.inputs(imu.id, sc.start_time + 20))
    assert rec.max_charge_pc == 0.0 and rec.fsm_state is FsmLevel.NORMAL
    assert 25.0 < rec.max_temp_c < 25.0 + 30.0 + 1.0


def test_same_inputs_give_identical_records():
    sc, sim = case_study_feed()
    imu = sim.imu_configs[1]
    runs = []
    for _ in range(2):
        node = ImuNode(imu)
        runs.append([node.tick(sim.inputs(imu.id, sc.start_time + t)) for t in range(1, 16)])
    assert runs[0] == runs[1]


def test_missing_sensors_carry_previous_values_and_flag():
    cfg = ImuConfig("imu-0")
    rec = sample_cycle(cfg, SensorInputs(time=1.0))
    for bit in (Quality.PD_UNAVAILABLE, Quality.DTS_UNAVAILABLE, Quality.CURRENT_UNAVAILABLE,
                Quality.VIBRATION_UNAVAILABLE):
        assert rec.quality & bit


def test_threshold_registers_are_readable_and_writable():
    node = ImuNode(ImuConfig("imu-0"))
    assert node.read_holding(THRESHOLD_BASE, 2) == [1000, 100]
    node.write_register(THRESHOLD_BASE, 1500)
    node.write_register(THRESHOLD_BASE + 5, 5)
    assert node.cfg.severe_charge_pc == 1500.0 and node.cfg.enter_debounce == 5
    req = ModbusFrame(1, 1, 0x03, struct.pack(">HH", 99, 1))
    assert node.modbus.handle(req).payload == bytes([ILLEGAL_ADDRESS])


class FlakyTransport:
    def __init__(self, up=True):
        self.up = up
        self.sent = []

    def connected(self):
        return self.up

    def send(self, alert):
        if not self.up:
            return False
        self.sent.append(alert.uuid)
        return True


def alert(seq):
    return Alert.make("imu-0", float(seq), FsmLevel.SEVERE, "pd_magnitude_pc", 1200.0, 1000.0, seq)


def test_healthy_transport_delivers_once():
    t = FlakyTransport()
    receipt = push_alert(alert(1), t)
    assert receipt.delivered and t.sent == [alert(1).uuid]


def test_alert_waits_for_recovery_with_backoff():
    t = FlakyTransport(up=False)
    pusher = AlertPusher(t, base_backoff_s=1.0)
    assert not pusher.push(alert(1), 0.0).delivered
    pusher.pump(0.5)  # still backing off
    t.up = True
    assert pusher.pump(0.9) == 0
    assert pusher.pump(1.0) == 1
    assert t.sent == [alert(1).uuid] and pusher.pump(2.0) == 0


def test_full_queue_drops_oldest():
    pusher = AlertPusher(FlakyTransport(up=False), capacity=2)
    for seq in range(3):
        pusher.push(alert(seq), 0.0)
    assert pusher.dropped == 1 and [a.seq for a in pusher.queue] == [1, 2]


def test_alert_uuid_is_deterministic_and_json_round_trips():
    a = alert(5)
    assert a.uuid == alert(5).uuid != alert(6).uuid
    assert Alert.from_json(a.to_json()) == a
