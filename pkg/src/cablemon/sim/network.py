"""Cable network topology, injected defects and the scenario document.

A scenario document is TOML. ``schema_version = 1`` is required. See
``docs/scenario_format.md`` for the full key reference.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario document. ``line``/``column`` are set for syntax errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class PointKind(str, Enum):
    JOINT = "Joint"
    TERMINATION = "Termination"
    SPAN = "Span"


class DefectKind(str, Enum):
    INTERNAL_VOID = "InternalVoid"
    SURFACE_DISCHARGE = "SurfaceDischarge"
    JOINT_OVERHEAT = "JointOverheat"
    MECHANICAL_IMPACT = "MechanicalImpact"
    NONE = "None"


# ground-truth diagnosis label for each injected defect kind
DEFECT_LABEL = {
    DefectKind.INTERNAL_VOID: "PartialDischarge",
    DefectKind.SURFACE_DISCHARGE: "PartialDischarge",
    DefectKind.JOINT_OVERHEAT: "Overheating",
    DefectKind.MECHANICAL_IMPACT: "MechanicalStress",
    DefectKind.NONE: "Normal",
}


@dataclass(frozen=True)
class MonitoredPoint:
    position_m: float
    kind: PointKind


@dataclass(frozen=True)
class CableCircuit:
    id: str
    length_m: float
    rated_current_a: float
    ambient_c: float
    monitored_points: tuple[MonitoredPoint, ...]
    rated_rise_c: float = 40.0
    load_profile: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    sensor_temp_profile: tuple[tuple[float, float], ...] = ((0.0, 25.0),)

    @property
    def k_th(self) -> float:
        """Temperature rise per A^2: rated current gives ``rated_rise_c`` over ambient."""
        return self.rated_rise_c / self.rated_current_a**2


@dataclass(frozen=True)
class DefectProfile:
    kind: DefectKind = DefectKind.NONE
    position_m: float = 0.0
    pd_magnitude_pc: float = 0.0
    pd_rate_pps: float = 0.0
    hotspot_delta_c: float = 0.0
    hotspot_ramp_c_per_min: float = 0.0
    vibration_rms: float = 0.0

    def __post_init__(self) -> None:
        for name in ("pd_magnitude_pc", "pd_rate_pps", "hotspot_delta_c", "hotspot_ramp_c_per_min", "vibration_rms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.kind is DefectKind.NONE and any(
            getattr(self, n)
            for n in ("pd_magnitude_pc", "pd_rate_pps", "hotspot_delta_c", "hotspot_ramp_c_per_min", "vibration_rms")
        ):
            raise ValueError("kind=None requires all magnitudes to be zero")
        if self.kind is DefectKind.SURFACE_DISCHARGE and not 100 <= self.pd_magnitude_pc <= 500:
            raise ValueError("pd_magnitude_pc for SurfaceDischarge must lie in [100, 500]")

    @property
    def label(self) -> str:
        return DEFECT_LABEL[self.kind]


@dataclass(frozen=True)
class Activation:
    """A defect placed on a circuit and active over [start_time, end_time)."""

    id: str
    circuit_id: str
    defect: DefectProfile
    start_time: float
    end_time: float
    expect: tuple[str, ...] = ()
    enabled: bool = True  # a disabled activation keeps its schedule and expectations but injects nothing

    def active(self, t: float) -> bool:
        return self.enabled and self.start_time <= t < self.end_time

    def minutes_elapsed(self, t: float) -> float:
        return max(0.0, t - self.start_time) / 60.0


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise. PD noise is either ``pd_sigma_mv`` or derived from ``pd_snr_db``."""

    pd_sigma_mv: float = 0.0
    pd_snr_db: float | None = None
    emi_rate_hz: float = 0.0
    emi_amplitude_mv: float = 0.0
    dts_sigma_c: float = 0.0
    baseline_segments_per_s: float = 10.0

    def __post_init__(self) -> None:
        if self.pd_sigma_mv < 0 or self.emi_rate_hz < 0 or self.emi_amplitude_mv < 0 or self.dts_sigma_c < 0:
            raise ValueError("noise parameters must be nonnegative")


@dataclass(frozen=True)
class SensorSpec:
    k_cal_pc_per_mv: float = 12.0
    pd_sample_rate_hz: float = 100e6
    pd_trigger_mv: float = 5.0
    segment_len: int = 256
    pretrigger: int = 64
    verdet_alpha: float = 7e-5
    verdet_t0_c: float = 25.0
    ct_saturation_a: float = 600.0
    vibration_baseline_rms: float = 1.0
    mains_hz: float = 50.0
    dts_spacing_m: float = 1.0


@dataclass(frozen=True)
class SpuriousEvent:
    circuit_id: str
    time: float
    indices: tuple[int, ...] = ()
    count: int = 0
    magnitude_c: float = 25.0


@dataclass(frozen=True)
class CableNetwork:
    site_id: str
    circuits: tuple[CableCircuit, ...]
    activations: tuple[Activation, ...]

    def circuit(self, circuit_id: str) -> CableCircuit:
        for c in self.circuits:
            if c.id == circuit_id:
                return c
        raise KeyError(circuit_id)


@dataclass(frozen=True)
class Checkpoint:
    name: str
    time: float


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    start_time: float
    duration_s: float
    tick_s: float
    compress: float
    network: CableNetwork
    noise: NoiseSpec
    sensors: SensorSpec
    spurious: tuple[SpuriousEvent, ...] = ()
    checkpoints: tuple[Checkpoint, ...] = ()
    imu: dict[str, Any] = field(default_factory=dict)
    edge: dict[str, Any] = field(default_factory=dict)
    cloud: dict[str, Any] = field(default_factory=dict)
    run: dict[str, Any] = field(default_factory=dict)
    expect: dict[str, Any] = field(default_factory=dict)

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration_s


_TOML_POS = re.compile(r"\(at line (\d+), column (\d+)\)")


def _parse_toml(text: str) -> dict[str, Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        m = _TOML_POS.search(msg)
        if m:
            raise ScenarioError(
                "parse error: " + _TOML_POS.sub("", msg).strip(), int(m.group(1)), int(m.group(2))
            ) from None
        raise ScenarioError("parse error: " + msg) from None


def _num(d: dict, key: str, where: str, default=None, *, positive=False, nonneg=False) -> float:
    if key not in d:
        if default is None:
            raise ScenarioError(f"{where}.{key}: required field missing")
        return float(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {v!r}")
    v = float(v)
    if positive and not v > 0:
        raise ScenarioError(f"{where}.{key}: must be positive")
    if nonneg and v < 0:
        raise ScenarioError(f"{where}.{key}: must be nonnegative")
    return v


def _profile(raw: Any, where: str, default: float) -> tuple[tuple[float, float], ...]:
    if raw is None:
        return ((0.0, default),)
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return ((0.0, float(raw)),)
    try:
        pts = tuple((float(t), float(v)) for t, v in raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected a number or a list of [t_s, value] pairs") from None
    if not pts:
        raise ScenarioError(f"{where}: profile is empty")
    if any(b[0] < a[0] for a, b in zip(pts, pts[1:])):
        raise ScenarioError(f"{where}: profile times must be nondecreasing")
    return pts


def _timestamp(raw: Any) -> float:
    if raw is None:
        return 1_700_000_000.0
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, dt.datetime):
        if raw.tzinfo is None:
            raw = raw.replace(tzinfo=dt.timezone.utc)
        return raw.timestamp()
    if isinstance(raw, str):
        return dt.datetime.fromisoformat(raw.replace("Z", "+00:00")).timestamp()
    raise ScenarioError(f"start: unsupported timestamp {raw!r}")


def _circuits(doc: dict) -> tuple[CableCircuit, ...]:
    raw = doc.get("circuits", [])
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("at least one circuit is required")
    out = []
    seen = set()
    for i, c in enumerate(raw):
        where = f"circuits[{i}]"
        cid = str(c.get("id", i + 1))
        if cid in seen:
            raise ScenarioError(f"{where}.id: duplicate circuit id {cid!r}")
        seen.add(cid)
        length = _num(c, "length_m", where, positive=True)
        rated = _num(c, "rated_current_a", where, positive=True)
        points = []
        for j, p in enumerate(c.get("points", [])):
            pw = f"{where}.points[{j}]"
            pos = _num(p, "position_m", pw)
            if not 0 <= pos <= length:
                raise ScenarioError(f"{pw}.position_m: position out of range [0, {length:g}]")
            try:
                kind = PointKind(p.get("kind", "Joint"))
            except ValueError:
                raise ScenarioError(f"{pw}.kind: unknown point kind {p.get('kind')!r}") from None
            points.append(MonitoredPoint(pos, kind))
        if not points:
            raise ScenarioError(f"{where}.points: at least one monitored point is required")
        points.sort(key=lambda p: p.position_m)
        out.append(
            CableCircuit(
                id=cid,
                length_m=length,
                rated_current_a=rated,
                ambient_c=_num(c, "ambient_c", where, 25.0),
                monitored_points=tuple(points),
                rated_rise_c=_num(c, "rated_rise_c", where, 40.0, nonneg=True),
                load_profile=_profile(c.get("load"), f"{where}.load", 0.0),
                sensor_temp_profile=_profile(c.get("sensor_temp"), f"{where}.sensor_temp", 25.0),
            )
        )
    return tuple(out)


def _activations(doc: dict, circuits: tuple[CableCircuit, ...], start: float, duration: float) -> tuple[Activation, ...]:
    by_id = {c.id: c for c in circuits}
    out = []
    for i, d in enumerate(doc.get("defects", [])):
        where = f"defects[{i}]"
        cid = str(d.get("circuit", circuits[0].id))
        if cid not in by_id:
            raise ScenarioError(f"{where}.circuit: unknown circuit {cid!r}")
        circuit = by_id[cid]
        try:
            kind = DefectKind(d.get("kind", "None"))
        except ValueError:
            raise ScenarioError(f"{where}.kind: unknown defect kind {d.get('kind')!r}") from None
        pos = _num(d, "position_m", where, 0.0)
        if not 0 <= pos <= circuit.length_m:
            raise ScenarioError(f"{where}.position_m: position out of range [0, {circuit.length_m:g}]")
        default_mag = 300.0 if kind is DefectKind.SURFACE_DISCHARGE else 0.0
        kw = {
            "pd_magnitude_pc": _num(d, "pd_magnitude_pc", where, default_mag, nonneg=True),
            "pd_rate_pps": _num(d, "pd_rate_pps", where, 0.0, nonneg=True),
            "hotspot_delta_c": _num(d, "hotspot_delta_c", where, 0.0, nonneg=True),
            "hotspot_ramp_c_per_min": _num(d, "hotspot_ramp_c_per_min", where, 0.0, nonneg=True),
            "vibration_rms": _num(d, "vibration_rms", where, 0.0, nonneg=True),
        }
        try:
            profile = DefectProfile(kind=kind, position_m=pos, **kw)
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
        t0 = _num(d, "start_s", where, 0.0, nonneg=True)
        t1 = _num(d, "end_s", where, duration, nonneg=True)
        if t1 < t0:
            raise ScenarioError(f"{where}.end_s: ends before it starts")
        if t0 > duration:
            raise ScenarioError(f"{where}.start_s: activation after the end of the scenario")
        expect = d.get("expect", ())
        if isinstance(expect, str):
            expect = (expect,)
        enabled = d.get("enabled", True)
        if not isinstance(enabled, bool):
            raise ScenarioError(f"{where}.enabled: expected true or false")
        out.append(
            Activation(str(d.get("id", f"defect-{i}")), cid, profile, start + t0, start + t1, tuple(expect), enabled)
        )
    return tuple(out)


def _section(doc: dict, name: str) -> dict:
    v = doc.get(name, {})
    if not isinstance(v, dict):
        raise ScenarioError(f"{name}: expected a table")
    return dict(v)


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    doc = _parse_toml(text)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    start = _timestamp(doc.get("start"))
    duration = _num(doc, "duration_s", "scenario", 60.0, positive=True)
    circuits = _circuits(doc)
    activations = _activations(doc, circuits, start, duration)
    site = _section(doc, "site")
    network = CableNetwork(str(site.get("id", "a")), circuits, activations)

    try:
        noise = NoiseSpec(**_section(doc, "noise"))
        sensors = SensorSpec(**_section(doc, "sensors"))
    except TypeError as exc:
        raise ScenarioError(f"unknown key: {exc}") from None
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    cids = {c.id for c in circuits}
    spurious = []
    for i, s in enumerate(doc.get("spurious", [])):
        where = f"spurious[{i}]"
        cid = str(s.get("circuit", circuits[0].id))
        if cid not in cids:
            raise ScenarioError(f"{where}.circuit: unknown circuit {cid!r}")
        spurious.append(
            SpuriousEvent(
                cid,
                start + _num(s, "time_s", where, nonneg=True),
                tuple(int(k) for k in s.get("indices", ())),
                int(s.get("count", 0)),
                _num(s, "magnitude_c", where, 25.0),
            )
        )
    checkpoints = tuple(
        Checkpoint(str(c["name"]), start + _num(c, "time_s", f"checkpoints[{i}]", nonneg=True))
        for i, c in enumerate(doc.get("checkpoints", []))
    )
    return Scenario(
        name=str(doc.get("name", "scenario")),
        seed=int(doc.get("seed", 0)),
        start_time=start,
        duration_s=duration,
        tick_s=_num(doc, "tick_s", "scenario", 1.0, positive=True),
        compress=_num(doc, "compress", "scenario", 1.0, positive=True),
        network=network,
        noise=noise,
        sensors=sensors,
        spurious=tuple(spurious),
        checkpoints=checkpoints,
        imu=_section(doc, "imu"),
        edge=_section(doc, "edge"),
        cloud=_section(doc, "cloud"),
        run=_section(doc, "run"),
        expect=_section(doc, "expect"),
    )


def build_network(config_text: str) -> CableNetwork:
    """Topology and injected defects from a scenario document."""
    return load_scenario(config_text).network


def interpolate(profile: tuple[tuple[float, float], ...], t_rel: float) -> float:
    """Piecewise-linear profile value at ``t_rel`` seconds from scenario start (held at the ends)."""
    if t_rel <= profile[0][0]:
        return profile[0][1]
    for (t0, v0), (t1, v1) in zip(profile, profile[1:]):
        if t_rel < t1:
            if t1 == t0:
                return v1
            return v0 + (v1 - v0) * (t_rel - t0) / (t1 - t0)
    return profile[-1][1]
