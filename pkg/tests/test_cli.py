"""Command line: exit codes and the artifacts each command leaves behind."""

import hashlib
import json
import subprocess
import sys
from importlib import resources

from cablemon.cli import main

CASE_STUDY = resources.files("cablemon.data").joinpath("case_study.scn").read_text()


def test_run_bundled_scenario(tmp_path, capsys):
    assert main(["run", "case_study.scn", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS  critical PD events" in out and "case_study: passed" in out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["passed"] and manifest["command"] == "run"
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert {"report.json", "metrics.csv"} <= set(manifest["files"])


def test_failed_expectation_exits_one(tmp_path, capsys):
    path = tmp_path / "wrong.scn"
    path.write_text(CASE_STUDY.replace("events = 1", "events = 2"))
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 1
    assert "FAIL  events: expected 2, got 1" in capsys.readouterr().out
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["passed"] is False


def test_bad_inputs_exit_two(tmp_path, capsys):
    assert main(["run", "no_such.scn", "--out", str(tmp_path)]) == 2
    assert main(["corpus", "3", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.scn"
    bad.write_text("schema_version = 1\ncircuits = []\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["evaluate", str(tmp_path / "nothing"), "--out", str(tmp_path)]) == 2
    assert "at least one circuit" in capsys.readouterr().err


def test_corpus_then_evaluate(tmp_path, capsys):
    assert main(["corpus", "4", "--seed", "3", "--out", str(tmp_path / "c")]) == 0
    assert main(["evaluate", str(tmp_path / "c"), "--out", str(tmp_path / "e")]) == 0
    doc = json.loads((tmp_path / "e" / "accuracy.json").read_text())
    assert doc["passed"] and doc["n"] == 4 and doc["accuracy"] == 1.0
    assert "per-scenario denominator" in capsys.readouterr().out


def test_seed_override_is_recorded(tmp_path):
    assert main(["run", "case_study", "--seed", "11", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["seed"] == 11
    assert json.loads((tmp_path / "manifest.json").read_text())["args"]["seed"] == 11


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "cablemon.cli", "--help"], capture_output=True, text=True, check=True)
    for command in ("run", "replay-trial", "corpus", "evaluate"):
        assert command in done.stdout
