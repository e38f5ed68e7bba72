"""Deterministic sensor simulator: scenario documents, signal synthesis and per-IMU feeds."""

from .network import (
    Activation,
    CableCircuit,
    CableNetwork,
    DefectKind,
    DefectProfile,
    MonitoredPoint,
    NoiseSpec,
    PointKind,
    Scenario,
    ScenarioError,
    SensorSpec,
    build_network,
    load_scenario,
)
from .simulator import Simulator, imu_id_for, zones
from .synth import (
    SpuriousSpec,
    inject_spurious,
    synth_current_sample,
    synth_pd_capture,
    synth_pd_waveform,
    synth_temperature_frame,
    synth_vibration,
)

__all__ = [
    "Activation",
    "CableCircuit",
    "CableNetwork",
    "DefectKind",
    "DefectProfile",
    "MonitoredPoint",
    "NoiseSpec",
    "PointKind",
    "Scenario",
    "ScenarioError",
    "SensorSpec",
    "Simulator",
    "SpuriousSpec",
    "build_network",
    "imu_id_for",
    "inject_spurious",
    "load_scenario",
    "synth_current_sample",
    "synth_pd_capture",
    "synth_pd_waveform",
    "synth_temperature_frame",
    "synth_vibration",
    "zones",
]
