"""Labeled scenario corpora for scoring diagnostic accuracy.

Scenarios cycle through the four labels so any ``n >= 4`` is stratified.
Each defect scenario draws a severity ratio against the threshold its label
depends on: the ``near`` band sits just over the threshold, ``far`` well over
it. Normal scenarios carry no defect, only noise, EMI bursts and spurious
DTS spikes, and are filed in the ``far`` band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("PartialDischarge", "Overheating", "MechanicalStress", "Normal")
NEAR = (1.05, 1.2)
FAR = (1.2, 3.0)
FAR_TEMP = (1.2, 1.5)  # peak temperature as a multiple of 80 C; 3x would be absurd
NEAR_SHARE = 0.4
NOISY_SHARE = 0.2
DURATION_S = 80
# a ramp only reads at full slope once the 60 s rise window lies inside it, then the rule's sustain runs
RAMP_DURATION_S = 110
LENGTH_M = 600
RATED_A = 400.0
RATED_RISE_C = 30.0

PD_CHARGE_PC = 500.0
PD_RATE_PPS = 5.0
TEMP_ALARM_C = 80.0
RISE_ALARM_C_PER_MIN = 5.0
VIBRATION_LIMIT = 3.0
VIBRATION_BASELINE = 1.0


@dataclass(frozen=True)
class CorpusEntry:
    file: str
    label: str
    band: str
    kind: str
    ratio: float
    noisy: bool

    def to_json(self) -> dict:
        return {
            "file": self.file,
            "label": self.label,
            "band": self.band,
            "kind": self.kind,
            "ratio": round(self.ratio, 6),
            "noisy": self.noisy,
        }


@dataclass(frozen=True)
class LabeledCorpus:
    root: Path
    seed: int
    entries: tuple[CorpusEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def path(self, entry: CorpusEntry) -> Path:
        return self.root / entry.file


def _fmt(x: float) -> str:
    return repr(round(float(x), 6))


def _header(name: str, seed: int, duration_s: int) -> list[str]:
    return [
        "schema_version = 1",
        f'name = "{name}"',
        f"seed = {seed}",
        'start = "2024-06-01T00:00:00Z"',
        f"duration_s = {duration_s}",
        "tick_s = 1.0",
        "",
        "[site]",
        'id = "corpus"',
        "",
    ]


def _circuit(ambient: float, load: float) -> list[str]:
    return [
        "[[circuits]]",
        'id = "1"',
        f"length_m = {LENGTH_M}",
        f"rated_current_a = {_fmt(RATED_A)}",
        f"ambient_c = {_fmt(ambient)}",
        f"rated_rise_c = {_fmt(RATED_RISE_C)}",
        f"load = {_fmt(load)}",
        "points = [",
        '  { position_m = 0, kind = "Termination" },',
        f'  {{ position_m = {LENGTH_M // 2}, kind = "Joint" }},',
        f'  {{ position_m = {LENGTH_M}, kind = "Termination" }},',
        "]",
        "",
    ]


def _defect(kind: str, start_s: float, position: int, **fields: float) -> list[str]:
    lines = ["[[defects]]", 'id = "d0"', 'circuit = "1"', f'kind = "{kind}"', f"position_m = {position}",
             f"start_s = {_fmt(start_s)}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in fields.items()]
    return lines + [""]


def _scenario(i: int, label: str, near: bool, noisy: bool, seed: int) -> tuple[str, CorpusEntry]:
    rng = np.random.default_rng([seed, i])
    ambient = rng.uniform(15.0, 30.0)
    load = rng.uniform(0.4, 0.75) * RATED_A
    baseline = ambient + RATED_RISE_C * (load / RATED_A) ** 2
    start_s = float(np.round(rng.uniform(5.0, 15.0) * 2) / 2)
    position = int(rng.choice([0, LENGTH_M // 2, LENGTH_M]))
    band_lo, band_hi = NEAR if near else FAR
    name = f"corpus-{i:03d}-{label}"
    scenario_seed = int(rng.integers(0, 2**31))
    lines = _circuit(ambient, load)
    duration = DURATION_S
    noise = {"pd_sigma_mv": rng.uniform(0.5, 3.0), "dts_sigma_c": rng.uniform(0.05, 0.2)}
    spurious: list[str] = []
    kind, ratio = "None", 0.0

    if label == "PartialDischarge":
        kind = "InternalVoid"
        # one parameter sits in the drawn band, the other is at least as far out
        r_charge = rng.uniform(band_lo, band_hi)
        r_rate = rng.uniform(band_lo, FAR[1])
        if rng.random() < 0.5:
            r_charge, r_rate = r_rate, r_charge
        ratio = min(r_charge, r_rate)
        lines += _defect(kind, start_s, position, pd_magnitude_pc=PD_CHARGE_PC * r_charge,
                         pd_rate_pps=PD_RATE_PPS * r_rate)
        if noisy:
            del noise["pd_sigma_mv"]
            noise["pd_snr_db"] = rng.uniform(0.0, 6.0)
    elif label == "Overheating":
        kind = "JointOverheat"
        if rng.random() < 0.5:
            ratio = rng.uniform(*(NEAR if near else FAR_TEMP))
            lines += _defect(kind, start_s, position, hotspot_delta_c=TEMP_ALARM_C * ratio - baseline)
        else:
            ratio = rng.uniform(band_lo, band_hi)
            duration = RAMP_DURATION_S
            lines += _defect(kind, start_s, position, hotspot_ramp_c_per_min=RISE_ALARM_C_PER_MIN * ratio)
        if noisy:
            noise["dts_sigma_c"] = rng.uniform(0.3, 0.5)
    elif label == "MechanicalStress":
        kind = "MechanicalImpact"
        ratio = rng.uniform(band_lo, band_hi)
        total = VIBRATION_LIMIT * ratio
        lines += _defect(kind, start_s, position, vibration_rms=math.sqrt(total**2 - VIBRATION_BASELINE**2))
    if label == "Normal" or noisy:
        noise["emi_rate_hz"] = rng.uniform(5.0, 30.0)
        noise["emi_amplitude_mv"] = rng.uniform(5.0, 25.0)
        for _ in range(int(rng.integers(1, 4))):
            spurious += [
                "[[spurious]]",
                'circuit = "1"',
                f"time_s = {int(rng.integers(5, duration - 5))}",
                f"count = {int(rng.integers(1, 4))}",
                f"magnitude_c = {_fmt(rng.uniform(20.0, 35.0))}",
                "",
            ]
    lines += ["[noise]"] + [f"{k} = {_fmt(v)}" for k, v in noise.items()] + [""]
    lines += spurious
    lines = _header(name, scenario_seed, duration) + lines
    band = "near" if near else "far"
    entry = CorpusEntry(f"{name}.scn", label, band, kind, round(float(ratio), 6), noisy)
    return "\n".join(lines), entry


def generate_corpus(n: int, out: str | Path, seed: int = 1) -> LabeledCorpus:
    """Write ``n`` scenarios and ``manifest.json`` under ``out``."""
    if n < len(LABELS):
        raise ValueError(f"n must be at least {len(LABELS)} so every label is represented")
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        label = LABELS[i % len(LABELS)]
        j = i // len(LABELS)
        defect = label != "Normal"
        near = defect and (j % 5) < round(NEAR_SHARE * 5)
        # one near and one far scenario in every ten per label get the harsher noise
        noisy = defect and (j % 10) in (1, 8)
        text, entry = _scenario(i, label, near, noisy, seed)
        (root / entry.file).write_text(text)
        entries.append(entry)
    manifest = {"seed": seed, "n": n, "scenarios": [e.to_json() for e in entries]}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return LabeledCorpus(root, seed, tuple(entries))


def load_corpus(root: str | Path) -> LabeledCorpus:
    root = Path(root)
    path = root / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json in {root}")
    doc = json.loads(path.read_text())
    entries = tuple(
        CorpusEntry(e["file"], e["label"], e["band"], e["kind"], float(e["ratio"]), bool(e["noisy"]))
        for e in doc["scenarios"]
    )
    return LabeledCorpus(root, int(doc.get("seed", 0)), entries)
