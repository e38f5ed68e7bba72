"""``cablemon`` command line: run scenarios, build and score corpora, replay the field trial.

Every command writes a report JSON and a ``manifest.json`` into ``--out`` and
exits 0 only if all of the scenario's assertions hold.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__
from .scenario.corpus import generate_corpus, load_corpus
from .scenario.evaluate import evaluate_accuracy
from .scenario.harness import ComponentError
from .scenario.runner import TrialReport, run_scenario
from .scenario.trial import replay_trial
from .sim.network import ScenarioError

log = logging.getLogger("cablemon")

MIN_ACCURACY = 0.95


def resolve_scenario(name: str) -> Path:
    """A path on disk, or the name of a bundled scenario such as ``case_study.scn``."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("cablemon.data").joinpath(name if name.endswith(".scn") else f"{name}.scn")
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario {name!r} on disk or bundled")


def bundled_corpus() -> Path:
    return Path(str(resources.files("cablemon.data").joinpath("corpus")))


def write_manifest(out: Path, command: str, args: dict, ok: bool) -> None:
    files = {}
    for f in sorted(out.iterdir()):
        if f.is_file() and f.name != "manifest.json":
            files[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    doc = {
        "command": command,
        "args": args,
        "passed": ok,
        "version": __version__,
        "python": platform.python_version(),
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def print_checks(report: TrialReport) -> None:
    for c in report.checks:
        mark = "PASS" if c.ok else "FAIL"
        line = f"{mark}  {c.name}: expected {c.expected}, got {c.actual}"
        print(line + (f"  ({c.detail})" if c.detail else ""))
    print(f"{report.ticks} ticks, counts {json.dumps(report.counts, sort_keys=True)}")


def cmd_run(args: argparse.Namespace) -> int:
    path = resolve_scenario(args.scenario)
    started = time.perf_counter()
    report = run_scenario(
        path, args.out, seed=args.seed, compress=args.compress, processes=args.processes,
        fast_forward=True if args.fast_forward else None,
    )
    print_checks(report)
    print(f"{report.scenario}: {'passed' if report.passed else 'FAILED'} in {time.perf_counter() - started:.1f} s")
    write_manifest(args.out, "run", {"scenario": str(path), "seed": args.seed, "compress": args.compress,
                                     "processes": args.processes}, report.passed)
    return 0 if report.passed else 1


def cmd_replay(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    report = replay_trial(args.out, seed=args.seed, compress=args.compress, processes=args.processes)
    print_checks(report)
    for row in report.kpi_table:
        print(f"  {row['checkpoint']:>7}: load factor {row['load_factor_pct']:.1f} %, "
              f"thermal margin {row['thermal_margin_pct']:.1f} %")
    print(f"replay-trial: {'passed' if report.passed else 'FAILED'} in {time.perf_counter() - started:.1f} s")
    write_manifest(args.out, "replay-trial", {"seed": args.seed, "processes": args.processes}, report.passed)
    return 0 if report.passed else 1


def cmd_corpus(args: argparse.Namespace) -> int:
    corpus = generate_corpus(args.n, args.out, seed=args.seed if args.seed is not None else 1)
    print(f"wrote {len(corpus)} scenarios and manifest.json to {corpus.root}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus if args.corpus else bundled_corpus())
    started = time.perf_counter()

    def progress(i: int, n: int, outcome) -> None:
        if not outcome.correct:
            log.warning("%s: expected %s, classified %s", outcome.entry.file, outcome.entry.label, outcome.predicted)
        if i % 20 == 0 or i == n:
            log.info("%d/%d scenarios", i, n)

    report = evaluate_accuracy(corpus, jobs=args.jobs, progress=progress)
    doc = report.to_json()
    far = report.subset("far")
    ok = report.accuracy >= args.min_accuracy and (far.n == 0 or far.accuracy == 1.0)
    doc["passed"] = ok
    doc["min_accuracy"] = args.min_accuracy
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "accuracy.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"accuracy {report.accuracy:.3f} over {report.n} scenarios (per-scenario denominator)")
    for band, b in doc["bands"].items():
        print(f"  {band}: {b['accuracy']:.3f} over {b['n']}")
    print(f"evaluate: {'passed' if ok else 'FAILED'} in {time.perf_counter() - started:.1f} s")
    write_manifest(args.out, "evaluate", {"corpus": str(corpus.root), "jobs": args.jobs}, ok)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out", type=Path, default=Path("cablemon-out"), help="artifacts directory")
    common.add_argument("-v", "--verbose", action="store_true")
    running = argparse.ArgumentParser(add_help=False)
    running.add_argument("--compress", type=float, default=None,
                         help="simulated seconds per wall second when --processes paces in real time (0 = no pacing)")
    running.add_argument("--processes", action="store_true",
                         help="run the broker as a separate process and talk TCP instead of in-process loopback")

    ap = argparse.ArgumentParser(prog="cablemon", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common, running], help="run one scenario")
    p.add_argument("scenario", help="scenario file, or a bundled name such as case_study.scn")
    p.add_argument("--fast-forward", action="store_true", help="skip quiet stretches between episodes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay-trial", parents=[common, running], help="replay the bundled three-month trial")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("corpus", parents=[common], help="generate a labeled corpus")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("evaluate", parents=[common], help="score diagnostic accuracy over a corpus")
    p.add_argument("corpus", nargs="?", type=Path, help="corpus directory (default: the bundled 200-scenario corpus)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--min-accuracy", type=float, default=MIN_ACCURACY)
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ComponentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
