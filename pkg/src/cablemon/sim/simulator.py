"""Per-IMU sensor feeds for a scenario, generated tick by tick on the simulated clock."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..imu.config import ImuConfig
from ..imu.cycle import SensorInputs
from ..signals import PdCapture, TemperatureFrame, VoltageReference
from .network import Activation, CableCircuit, DefectKind, DefectProfile, Scenario, interpolate
from .synth import (
    SpuriousSpec,
    inject_spurious,
    stable_key,
    synth_current_sample,
    synth_pd_capture,
    synth_temperature_frame,
    synth_vibration,
)

log = logging.getLogger(__name__)

PD_KINDS = (DefectKind.INTERNAL_VOID, DefectKind.SURFACE_DISCHARGE)
QUIET = DefectProfile()


def imu_id_for(circuit_id: str, index: int) -> str:
    return f"c{circuit_id}-p{index}"


@dataclass(frozen=True)
class ImuPlacement:
    cfg: ImuConfig
    circuit: CableCircuit


def zones(circuit: CableCircuit) -> list[tuple[float, float]]:
    """Stretch of cable each monitored point covers: up to the midpoints with its neighbours."""
    pos = [p.position_m for p in circuit.monitored_points]
    edges = [0.0] + [(a + b) / 2.0 for a, b in zip(pos, pos[1:])] + [circuit.length_m]
    return list(zip(edges[:-1], edges[1:]))


def in_zone(position_m: float, zone: tuple[float, float], length_m: float) -> bool:
    lo, hi = zone
    return lo <= position_m < hi or (hi == length_m and position_m == length_m)


class Simulator:
    """Deterministic sensor model of a scenario's network.

    ``inputs(imu_id, t)`` covers the tick ending at ``t``. All draws are keyed
    on (seed, what, when), so feeds do not depend on the order of calls.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.seed = scenario.seed
        s = scenario.sensors
        self.voltage_ref = VoltageReference(scenario.start_time, s.mains_hz)
        self.placements: dict[str, ImuPlacement] = {}
        unit = 0
        for circuit in scenario.network.circuits:
            for j, (point, zone) in enumerate(zip(circuit.monitored_points, zones(circuit))):
                unit += 1
                base = ImuConfig(
                    id=imu_id_for(circuit.id, j),
                    position_m=point.position_m,
                    circuit_id=circuit.id,
                    zone_m=zone,
                    unit_id=unit % 247 + 1,
                    tick_s=scenario.tick_s,
                    k_cal_pc_per_mv=s.k_cal_pc_per_mv,
                    verdet_alpha=s.verdet_alpha,
                    verdet_t0_c=s.verdet_t0_c,
                    thermal_k_per_a2=circuit.k_th,
                )
                cfg = base.with_overrides(dict(scenario.imu)) if scenario.imu else base
                self.placements[cfg.id] = ImuPlacement(cfg, circuit)
        self._frame_cache: dict[str, TemperatureFrame] = {}
        self._frame_time: float | None = None

    @property
    def imu_configs(self) -> list[ImuConfig]:
        return [p.cfg for p in self.placements.values()]

    def load_a(self, circuit: CableCircuit, t: float) -> float:
        return interpolate(circuit.load_profile, t - self.scenario.start_time)

    def sensor_temp_c(self, circuit: CableCircuit, t: float) -> float:
        return interpolate(circuit.sensor_temp_profile, t - self.scenario.start_time)

    def activations(self, circuit_id: str) -> list[Activation]:
        return [a for a in self.scenario.network.activations if a.circuit_id == circuit_id and a.enabled]

    def zone_activations(self, imu_id: str, kinds: tuple[DefectKind, ...]) -> list[Activation]:
        p = self.placements[imu_id]
        return [
            a
            for a in self.activations(p.circuit.id)
            if a.defect.kind in kinds and in_zone(a.defect.position_m, p.cfg.zone_m, p.circuit.length_m)
        ]

    # channels

    def pd_capture(self, imu_id: str, t: float) -> PdCapture:
        sc = self.scenario
        s = sc.sensors
        t0 = t - sc.tick_s
        active = [a for a in self.zone_activations(imu_id, PD_KINDS) if a.start_time < t and a.end_time > t0]
        if len(active) > 1:
            # one discharge source per zone is modelled; the strongest wins
            active.sort(key=lambda a: a.defect.pd_magnitude_pc, reverse=True)
        act = active[0] if active else None
        defect = act.defect if act else QUIET
        cap, _ = synth_pd_capture(
            defect,
            sc.tick_s,
            self.seed,
            sc.noise,
            start_time=t0,
            active_since=act.start_time if act else t0,
            sample_rate_hz=s.pd_sample_rate_hz,
            k_cal=s.k_cal_pc_per_mv,
            trigger_mv=s.pd_trigger_mv,
            segment_len=s.segment_len,
            pretrigger=s.pretrigger,
            voltage_ref=self.voltage_ref,
            defect_key=stable_key("pd", act.id if act else imu_id),
        )
        if act is not None and act.end_time < t:
            keep = cap.segment_starts / cap.sample_rate_hz + t0 < act.end_time
            cap = PdCapture(cap.sample_rate_hz, t0, sc.tick_s, cap.segment_starts[keep], cap.segments[keep])
        return cap

    def circuit_frame(self, circuit: CableCircuit, t: float) -> TemperatureFrame:
        if self._frame_time != t:
            self._frame_cache.clear()
            self._frame_time = t
        frame = self._frame_cache.get(circuit.id)
        if frame is None:
            sc = self.scenario
            frame = synth_temperature_frame(
                circuit,
                self.load_a(circuit, t),
                self.activations(circuit.id),
                t,
                spacing_m=sc.sensors.dts_spacing_m,
                noise_sigma_c=sc.noise.dts_sigma_c,
                seed=self.seed,
            )
            for ev in sc.spurious:
                if ev.circuit_id == circuit.id and t - sc.tick_s < ev.time <= t:
                    frame = inject_spurious(frame, SpuriousSpec(ev.indices, ev.count, ev.magnitude_c), self.seed)
            self._frame_cache[circuit.id] = frame
        return frame

    def dts_frame(self, imu_id: str, t: float) -> TemperatureFrame:
        p = self.placements[imu_id]
        lo, hi = p.cfg.zone_m
        return self.circuit_frame(p.circuit, t).slice_m(lo, hi)

    def vibration(self, imu_id: str, t: float) -> np.ndarray:
        p = self.placements[imu_id]
        n = max(1, int(round(p.cfg.sampling_hz * self.scenario.tick_s)))
        defect_rms = sum(
            a.defect.vibration_rms
            for a in self.zone_activations(imu_id, (DefectKind.MECHANICAL_IMPACT,))
            if a.active(t)
        )
        return synth_vibration(
            n,
            p.cfg.sampling_hz,
            self.scenario.sensors.vibration_baseline_rms,
            defect_rms,
            self.seed * 7919 + stable_key("imu", imu_id),
            t,
        )

    def inputs(self, imu_id: str, t: float) -> SensorInputs:
        p = self.placements[imu_id]
        s = self.scenario.sensors
        current = synth_current_sample(
            self.load_a(p.circuit, t),
            self.sensor_temp_c(p.circuit, t),
            t,
            alpha=s.verdet_alpha,
            t0_c=s.verdet_t0_c,
            ct_saturation_a=s.ct_saturation_a,
        )
        return SensorInputs(
            time=t,
            pd=self.pd_capture(imu_id, t),
            dts=self.dts_frame(imu_id, t),
            current=current,
            vibration=self.vibration(imu_id, t),
            voltage_ref=self.voltage_ref,
        )

    def busy(self, t0: float, t1: float, margin_s: float = 0.0) -> bool:
        """Whether any defect or spurious event touches [t0 - margin, t1 + margin)."""
        lo, hi = t0 - margin_s, t1 + margin_s
        if any(a.start_time < hi and a.end_time > lo for a in self.scenario.network.activations):
            return True
        return any(lo <= e.time < hi for e in self.scenario.spurious)

