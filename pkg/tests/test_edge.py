"""Edge server: rule language, rule engine, diagnosis, notification and the poll cycle."""

import http.server
import json
import random
import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cablemon.edge import (
    CircuitInfo,
    EdgeConfig,
    EdgeServer,
    Event,
    FileSink,
    ImuEndpoint,
    Notifier,
    RuleEngine,
    RuleSet,
    RuleSyntaxError,
    Severity,
    TimeSeriesStore,
    WebhookSink,
    classify_fault,
    default_rules,
    evaluate_rules,
    notify,
    parse_rules,
)
from cablemon.edge.rules import And, Comparison, Or
from cablemon.edge.server import COMMS_RULE, GRADIENT_RULE
from cablemon.imu.record import Alert, FeatureRecord, FsmLevel
from cablemon.imu.registers import encode_registers
from cablemon.net.modbus import ModbusClient, ModbusServerCore
from cablemon.net.transport import LoopbackModbus

SEVERE_TEXT = "RULE severe_discharge WHEN pd_magnitude_pc > 500 AND pd_rate_pps > 5 FOR 10s THEN CRITICAL RAISE_AND_NOTIFY"
RULES = default_rules()


# rule language


def test_parses_the_severe_discharge_rule():
    (rule,) = parse_rules(SEVERE_TEXT)
    assert rule.name == "severe_discharge"
    assert rule.condition == And((Comparison("pd_magnitude_pc", ">", 500.0), Comparison("pd_rate_pps", ">", 5.0)))
    assert rule.sustain_s == 10.0 and rule.severity is Severity.CRITICAL
    assert rule.action.notifies and rule.label == "PartialDischarge"
    assert RULES.get("severe_discharge") == rule


def test_empty_and_comment_only_files_give_empty_rule_sets():
    assert len(parse_rules("")) == 0
    assert parse_rules("# nothing here\n\n   # still nothing") == RuleSet()


def test_unknown_metric():
    with pytest.raises(RuleSyntaxError, match="unknown metric foo") as err:
        parse_rules("RULE x\n  WHEN foo > 1 THEN INFO NOTIFY")
    assert (err.value.line, err.value.column) == (2, 8)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("RULE x WHEN temp_c 80 THEN INFO NOTIFY", ">="),
        ("RULE x WHEN temp_c > 80 FOR 10 THEN INFO NOTIFY", "<seconds>s"),
        ("RULE x WHEN temp_c > 80 THEN LOUD NOTIFY", "CRITICAL"),
        ("RULE x WHEN temp_c > 80 THEN INFO", "RAISE_EVENT"),
        ("RULE x WHEN temp_c > 80 BANANA THEN INFO NOTIFY", "THEN"),
        ("RULE WHEN temp_c > 80 THEN INFO NOTIFY", "WHEN"),  # WHEN was taken as the name
        ("RULE x WHEN temp_c > 80 THEN INFO NOTIFY ;", None),
    ],
)
def test_syntax_errors_name_what_was_expected(text, expected):
    with pytest.raises(RuleSyntaxError) as err:
        parse_rules(text)
    if expected:
        assert expected in err.value.expected


def test_duplicate_rule_names_are_rejected():
    with pytest.raises(RuleSyntaxError, match="duplicate"):
        parse_rules(SEVERE_TEXT + "\n" + SEVERE_TEXT)


def test_and_binds_tighter_than_or():
    (rule,) = parse_rules("RULE x WHEN temp_c > 1 OR temp_c < 0 AND current_a >= 2 THEN INFO RAISE_EVENT")
    assert isinstance(rule.condition, Or)
    assert isinstance(rule.condition.terms[1], And)
    assert rule.sustain_s == 0.0 and not rule.action.notifies


# rule engine


def steady(values, seconds, imu="imu-0"):
    return {imu: [(float(t), dict(values)) for t in range(seconds)]}


def test_sustained_discharge_raises_one_critical_event():
    events = evaluate_rules(RULES, steady({"pd_magnitude_pc": 520.0, "pd_rate_pps": 6.0}, 11))
    assert [(e.rule_name, e.severity, e.time) for e in events] == [("severe_discharge", Severity.CRITICAL, 10.0)]


def test_strict_threshold_and_short_runs_stay_silent():
    assert evaluate_rules(RULES, steady({"pd_magnitude_pc": 499.0, "pd_rate_pps": 50.0}, 60)) == []
    assert evaluate_rules(RULES, steady({"pd_magnitude_pc": 520.0, "pd_rate_pps": 6.0}, 10)) == []


def test_continuous_condition_fires_once_and_rearms_after_a_break():
    hot = {"temp_c": 90.0}
    series = [(float(t), hot) for t in range(500)]
    assert len(evaluate_rules(RULES, {"i": series})) == 1
    series += [(500.0, {"temp_c": 20.0})] + [(float(t), hot) for t in range(501, 520)]
    events = evaluate_rules(RULES, {"i": series})
    assert [e.time for e in events] == [10.0, 511.0]
    assert len({e.uuid for e in events}) == 2


def test_sample_gap_breaks_the_run():
    hot = {"temp_c": 90.0}
    series = [(float(t), hot) for t in range(6)] + [(float(t), hot) for t in range(20, 26)]
    assert evaluate_rules(RULES, {"i": series}) == []


samples = st.lists(
    st.fixed_dictionaries(
        {
            "pd_magnitude_pc": st.sampled_from([0.0, 400.0, 1200.0]),
            "pd_rate_pps": st.sampled_from([0.0, 12.0]),
            "temp_c": st.sampled_from([40.0, 85.0]),
            "temp_rise_c_per_min": st.sampled_from([0.0, 6.0]),
            "vibration_rms": st.sampled_from([1.0, 4.0]),
        }
    ),
    min_size=1,
    max_size=40,
).map(lambda ms: [(float(t), m) for t, m in enumerate(ms)])


@given(samples, samples, st.randoms(use_true_random=False))
def test_rule_order_and_other_imus_do_not_change_events(a, b, rnd):
    baseline = evaluate_rules(RULES, {"a": a, "b": b})
    shuffled = list(RULES.rules)
    rnd.shuffle(shuffled)
    assert evaluate_rules(RuleSet(tuple(shuffled)), {"a": a, "b": b}) == baseline
    # removing IMU b entirely leaves IMU a's events as they were
    assert [e for e in baseline if e.imu_id == "a"] == evaluate_rules(RULES, {"a": a})


def test_event_json_round_trip():
    (ev,) = evaluate_rules(RULES, steady({"temp_c": 85.0}, 11))
    assert Event.from_json(json.loads(json.dumps(ev.to_json()))) == ev


# diagnosis


def make_event(rule, label, score, severity=Severity.CRITICAL):
    return Event.make(0.0, "1", "i", rule, severity, label, {}, score, rule)


def test_severe_discharge_at_1200_pc_is_partial_discharge():
    rule = RULES.get("severe_discharge")
    metrics = {"pd_magnitude_pc": 1200.0, "pd_rate_pps": 12.0}
    d = classify_fault([make_event(rule.name, rule.label, rule.score(metrics))])
    assert d.label == "PartialDischarge" and d.score >= 90


def test_no_events_is_normal_and_ties_prefer_pd():
    assert classify_fault([]).label == "Normal" and classify_fault([]).score == 0.0
    tie = [make_event("overtemperature", "Overheating", 70.0), make_event("severe_discharge", "PartialDischarge", 70.0)]
    assert classify_fault(tie).label == "PartialDischarge"
    assert classify_fault([make_event(COMMS_RULE, "Normal", 0.0, Severity.WARNING)]).label == "Normal"


def test_score_formula():
    rule = RULES.get("overtemperature")
    # min(1, observed/threshold - 1 + 0.5) * 100
    assert rule.score({"temp_c": 88.0}) == pytest.approx(60.0)
    assert rule.score({"temp_c": 200.0}) == 100.0


# notification


def test_file_sink_writes_one_line_and_suppresses_duplicates(tmp_path):
    (ev,) = evaluate_rules(RULES, steady({"temp_c": 85.0}, 11))
    notifier = Notifier([FileSink(tmp_path / "n.jsonl")])
    assert [r.status for r in notifier.notify(ev)] == ["delivered"]
    assert [r.status for r in notifier.notify(ev)] == ["duplicate"]
    (line,) = (tmp_path / "n.jsonl").read_text().splitlines()
    doc = json.loads(line)
    assert doc["uuid"] == ev.uuid and doc["rule"] == "overtemperature" and doc["metrics"]["temp_c"] == 85.0


class _Always500(http.server.BaseHTTPRequestHandler):
    hits = 0

    def do_POST(self):
        type(self).hits += 1
        self.rfile.read(int(self.headers["Content-Length"]))
        self.send_response(500)
        self.end_headers()

    def log_message(self, *args):
        pass


def test_failing_webhook_goes_to_dead_letter(tmp_path):
    server = http.server.HTTPServer(("127.0.0.1", 0), _Always500)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        (ev,) = evaluate_rules(RULES, steady({"temp_c": 85.0}, 11))
        sink = WebhookSink(f"http://127.0.0.1:{server.server_port}/hook", timeout=2.0)
        receipts = notify(ev, Notifier([sink], dead_letter=tmp_path / "dead.jsonl"))
    finally:
        server.shutdown()
    assert [(r.status, r.attempts) for r in receipts] == [("dead_letter", 3)]
    assert _Always500.hits == 3
    assert json.loads((tmp_path / "dead.jsonl").read_text())["document"]["uuid"] == ev.uuid


# poll cycle


class ScriptedImu:
    """Register map serving whatever record the test sets."""

    def __init__(self, imu_id):
        self.imu_id = imu_id
        self.seq = 0
        self.set(time=0.0)

    def set(self, time, **fields):
        self.seq += 1
        self.regs = encode_registers(FeatureRecord(self.imu_id, self.seq, time, **fields))

    def read_holding(self, address, count):
        return self.regs[address : address + count]

    def write_register(self, address, value):
        raise NotImplementedError


class Recorder:
    def __init__(self):
        self.published = []

    def publish(self, topic, payload, qos=1):
        self.published.append((topic, json.loads(payload)))


def build_edge(tmp_path, n=4):
    imus = [ScriptedImu(f"imu-{i}") for i in range(n)]
    links = [LoopbackModbus(ModbusServerCore(imu)) for imu in imus]
    endpoints = [ImuEndpoint(imu.imu_id, "1", ModbusClient(link)) for imu, link in zip(imus, links)]
    pub = Recorder()
    server = EdgeServer(EdgeConfig(), RULES, {"1": CircuitInfo("1", 400.0)}, endpoints,
                        TimeSeriesStore(tmp_path / "store"), publisher=pub)
    return server, imus, links, pub


def test_each_cycle_archives_one_record_per_imu(tmp_path):
    server, imus, _, _ = build_edge(tmp_path)
    for t in range(1, 6):
        for imu in imus:
            imu.set(float(t), max_temp_c=40.0, current_a=200.0)
        stats = server.poll_cycle(float(t))
        assert (stats.polled, stats.archived, stats.failures) == (4, 4, 0)
    assert server.store.count("imu-0/temp_c") == 5
    assert server.store.last("imu-2/load_factor_pct") == (5.0, 50.0)


def test_stopped_imu_warns_after_three_cycles_and_others_carry_on(tmp_path):
    server, imus, links, pub = build_edge(tmp_path)
    links[1].stopped = True
    warnings = []
    for t in range(1, 8):
        for imu in imus:
            imu.set(float(t), max_temp_c=40.0)
        stats = server.poll_cycle(float(t))
        assert stats.archived == 3
        warnings += [(t, e.imu_id) for e in stats.events if e.rule_name == COMMS_RULE]
    assert warnings == [(3, "imu-1")]
    assert all(server.store.count(f"imu-{i}/temp_c") == 7 for i in (0, 2, 3))
    assert any(topic.endswith("/events") and doc["rule_name"] == COMMS_RULE for topic, doc in pub.published)


def test_sustained_discharge_is_published_and_archived(tmp_path):
    server, imus, _, pub = build_edge(tmp_path, n=2)
    for t in range(1, 16):
        imus[0].set(float(t), max_charge_pc=1200.0, rate_pps=12.0)
        imus[1].set(float(t))
        server.poll_cycle(float(t))
    (ev,) = server.events
    assert ev.rule_name == "severe_discharge" and ev.imu_id == "imu-0" and ev.time == 11.0
    assert ev.metrics["pd_magnitude_pc"] == 1200.0
    assert [d["uuid"] for topic, d in pub.published if topic == "mine/a/circuit/1/events"] == [ev.uuid]
    assert server.diagnose(circuit_id="1").label == "PartialDischarge"


def test_gradient_alert_becomes_one_critical_event(tmp_path):
    server, _, _, _ = build_edge(tmp_path, n=1)
    alert = Alert.make("imu-0", 5.0, FsmLevel.SEVERE, "temp_gradient_c_per_m", 12.0, 10.0, 5)
    ev = server.handle_alert(alert)
    assert ev.rule_name == GRADIENT_RULE and ev.severity is Severity.CRITICAL and ev.circuit_id == "1"
    assert server.handle_alert(alert) is None
    pd_alert = Alert.make("imu-0", 6.0, FsmLevel.SEVERE, "pd_magnitude_pc", 1200.0, 1000.0, 6)
    assert server.handle_alert(pd_alert) is None
    assert len(server.events) == 1 and len(server.alerts) == 2


def test_unchanged_sequence_is_not_archived_twice(tmp_path):
    server, imus, _, _ = build_edge(tmp_path, n=1)
    imus[0].set(1.0)
    server.poll_cycle(1.0)
    assert server.poll_cycle(2.0).archived == 0
    imus[0].seq += 3
    imus[0].set(3.0)
    server.poll_cycle(3.0)
    assert server.endpoints[0].seq_gaps == 3


def test_engine_reset_forgets_runs():
    engine = RuleEngine(RULES)
    for t in range(5):
        engine.observe("i", "1", float(t), {"temp_c": 90.0})
    engine.reset("i")
    fired = [e for t in range(5, 16) for e in engine.observe("i", "1", float(t), {"temp_c": 90.0})]
    assert [e.time for e in fired] == [15.0] and engine.firing("i") == ["overtemperature"]


def test_random_order_samples_are_sorted_per_imu():
    series = [(float(t), {"temp_c": 90.0}) for t in range(12)]
    shuffled = series[:]
    random.Random(3).shuffle(shuffled)
    assert evaluate_rules(RULES, {"i": shuffled}) == evaluate_rules(RULES, {"i": series})
