"""Acceptance criteria, each with its runtime limit.

Every test records a PASS/FAIL line that is printed in the ``acceptance
criteria`` section at the end of the pytest run. The oracles are the ones the
topical test modules use; they are called here again so this file alone
settles every criterion.
"""

import math
from importlib import resources

import pytest

import test_boundaries as boundaries
import test_dsp as dsp
import test_exactly_once as exactly_once
import test_protocols as protocols
import test_store as store
from cablemon.cli import bundled_corpus
from cablemon.scenario.evaluate import evaluate_accuracy
from cablemon.scenario.runner import run_scenario
from cablemon.scenario.trial import replay_trial
from cablemon.sim.network import load_scenario

pytestmark = pytest.mark.slow
CASE_STUDY = load_scenario(resources.files("cablemon.data").joinpath("case_study.scn").read_text())


def within(value, target, rel):
    return value is not None and abs(value - target) <= rel * target


def test_1_case_study(tmp_path, acceptance):
    report = run_scenario(CASE_STUDY, tmp_path)
    crit = [e for e in report.events if e["severity"] == "CRITICAL" and e["diagnosis"] == "PartialDischarge"]
    charge = [e["metrics"]["pd_magnitude_pc"] for e in crit]
    rate = [e["metrics"]["pd_rate_pps"] for e in crit]
    acceptance.detail = f"{len(crit)} critical PD event(s), charge {charge} pC, rate {rate} pps"
    assert len(crit) == 1
    assert within(charge[0], 1200, 0.05) and within(rate[0], 12, 0.05)
    assert acceptance.elapsed() < 30


def test_2_corpus_accuracy(acceptance):
    report = evaluate_accuracy(bundled_corpus())
    far = report.subset("far")
    acceptance.detail = (f"accuracy {report.accuracy:.3f} over {report.n}, far band {far.accuracy:.3f} over {far.n}"
                         f" ({len(report.errors())} misclassified)")
    assert report.n == 200
    assert report.accuracy >= 0.95
    assert far.n > 0 and far.accuracy == 1.0
    assert acceptance.elapsed() < 300


def test_3_trial_replay(tmp_path, acceptance):
    report = replay_trial(tmp_path)
    counts = (report.counts["PartialDischarge"], report.counts["Overheating"], report.counts["severe"])
    rows = {r["checkpoint"]: r for r in report.kpi_table}
    load = (rows["before"]["load_factor_pct"], rows["after"]["load_factor_pct"])
    margin = (rows["before"]["thermal_margin_pct"], rows["after"]["thermal_margin_pct"])
    acceptance.detail = f"counts {counts}, load factor {load} %, thermal margin {margin} %"
    assert counts == (18, 21, 7)
    assert all(math.isclose(a, b, abs_tol=0.05) for a, b in zip(load + margin, (82, 76, 8, 12)))
    assert report.passed, [c.detail or c.name for c in report.checks if not c.ok]
    assert acceptance.elapsed() < 120


def test_4_threshold_boundaries(acceptance):
    n = 0
    for rule, metric, tau, others in boundaries.RULE_CASES:
        boundaries.test_rule_at_threshold_is_silent(rule, metric, tau, others)
        boundaries.test_rule_one_ulp_over_fires_after_sustain(rule, metric, tau, others)
        n += 1
    for field, tau, level in boundaries.FSM_CASES:
        boundaries.test_fsm_at_threshold_stays_put(field, tau, level)
        boundaries.test_fsm_one_ulp_over_enters_after_debounce(field, tau, level)
        n += 1
    kinds = boundaries.RecommendationKind
    load_cases = [
        (80.0, 50.0, kinds.NONE), (boundaries.up(80.0), 50.0, kinds.LOAD_LIMIT),
        (50.0, 10.0, kinds.NONE), (50.0, boundaries.down(10.0), kinds.LOAD_LIMIT),
    ]
    for load, margin, kind in load_cases:
        boundaries.test_load_recommendation_boundaries(load, margin, kind)
    n += 2
    acceptance.detail = f"{n} threshold cases, equal is silent and one ulp past fires"
    assert acceptance.elapsed() < 10


def test_5_protocol_round_trips(acceptance):
    protocols.test_mbap_read_request_example()
    protocols.test_publish_example_header()
    protocols.test_modbus_round_trip_and_prefix_safety()
    protocols.test_mqtt_round_trip_and_prefix_safety()
    acceptance.detail = f"{protocols.PROPERTY_EXAMPLES} generated inputs per codec, MBAP example exact"
    assert protocols.PROPERTY_EXAMPLES >= 10_000
    assert acceptance.elapsed() < 60


def test_6_exactly_once(tmp_path, acceptance):
    rate, faults_seen = exactly_once.exactly_once_rate(exactly_once.TRIALS, tmp_path)
    acceptance.detail = f"{rate:.1%} of {exactly_once.TRIALS} faulted trials stored each uuid exactly once"
    assert faults_seen["puback_lost"] > 0 and faults_seen["publish_duplicated"] > 0
    assert exactly_once.TRIALS >= 1000 and rate == 1.0
    assert acceptance.elapsed() < 60


def test_7_dsp_oracles(acceptance):
    dsp.test_detection_at_0db_precision_and_recall()
    for seed in range(40):
        dsp.test_acf_rate_within_five_percent(seed)
    dsp.test_verdet_round_trip()
    dsp.test_kalman_flags_every_large_outlier()
    for q, r in [(0.05, 1.0), (0.01, 0.5), (0.2, 2.0)]:
        dsp.test_posterior_variance_reaches_closed_form(q, r)
    dsp.test_pointwise_fusion_variance_reaches_closed_form()
    acceptance.detail = "0 dB detection, ACF rate, Verdet round trip, Kalman outliers and fixed point"
    assert acceptance.elapsed() < 120


def test_8_store_oracle(tmp_path, acceptance):
    store.test_randomized_workload_matches_reference(tmp_path / "workload")
    store.test_truncated_tail_loses_only_the_partial_entry(tmp_path / "crash")
    acceptance.detail = f"{store.WORKLOAD_OPS} ops match the reference, tail cut loses only the partial entry"
    assert store.WORKLOAD_OPS >= 100_000
    assert acceptance.elapsed() < 60


def test_9_onset_latency(tmp_path, acceptance):
    report = run_scenario(CASE_STUDY, tmp_path)
    poll_s = float(CASE_STUDY.edge.get("poll_period_s", 1.0))
    bound = 2 * poll_s + CASE_STUDY.tick_s  # the cloud ingests once per tick
    onset = report.latency_s["onset"]
    acceptance.detail = f"onset to high-priority cloud alarm {[o['latency_s'] for o in onset]} s, bound {bound} s"
    assert onset and all(o["latency_s"] <= bound for o in onset)
    assert any(a["rule_name"] == "severe_discharge" and a["priority"] == "high" for a in report.alarms)
    assert acceptance.elapsed() < 30
