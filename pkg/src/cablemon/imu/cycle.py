"""One sampling tick of an IMU: raw sensor inputs in, one feature record out."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..dsp import PointwiseFusion, compensate_verdet, extract_pulses, phase_resolve, thermal_features
from ..dsp.phase import N_PHASE_BINS
from ..dsp.pulses import PulseFeature
from ..dsp.rate import estimate_repetition_rate
from ..signals import CurrentSample, PdCapture, TemperatureFrame, VoltageReference
from .config import ImuConfig
from .record import FeatureRecord, FsmLevel, Quality


@dataclass(frozen=True)
class SensorInputs:
    """Everything an IMU reads during one tick. ``None`` marks an unavailable sensor."""

    time: float
    pd: PdCapture | None = None
    dts: TemperatureFrame | None = None
    current: CurrentSample | None = None
    vibration: np.ndarray | None = None
    voltage_ref: VoltageReference | None = None


@dataclass
class CycleState:
    """Per-IMU history the feature extractors need across ticks."""

    seq: int = 0
    pulses: deque = field(default_factory=deque)
    frames: deque = field(default_factory=deque)
    fusion: PointwiseFusion | None = None
    last_current_a: float | None = None
    last: FeatureRecord | None = None


def _pd_features(cfg: ImuConfig, inputs: SensorInputs, state: CycleState) -> tuple[float, float, tuple[int, ...]]:
    t = inputs.time
    pulses: list[PulseFeature] = extract_pulses(inputs.pd, levels=cfg.wavelet_levels, k_cal=cfg.k_cal_pc_per_mv)
    hist: tuple[int, ...] = (0,) * N_PHASE_BINS
    if inputs.voltage_ref is not None and pulses:
        pulses, h = phase_resolve(pulses, inputs.voltage_ref)
        hist = tuple(int(v) for v in h)
    state.pulses.extend(pulses)
    horizon = t - cfg.rate_window_s
    while state.pulses and state.pulses[0].time < horizon:
        state.pulses.popleft()
    max_charge = max((p.charge_pc for p in pulses), default=0.0)
    rate = estimate_repetition_rate(list(state.pulses), cfg.rate_window_s) if state.pulses else 0.0
    return max_charge, rate, hist


def _thermal(cfg: ImuConfig, frame: TemperatureFrame, current_a: float | None, state: CycleState):
    if state.fusion is None:
        state.fusion = PointwiseFusion(q=cfg.fusion_q, r=cfg.fusion_r)
    delta = 0.0
    if cfg.thermal_k_per_a2 and current_a is not None and state.last_current_a is not None:
        delta = cfg.thermal_k_per_a2 * (current_a**2 - state.last_current_a**2)
    cleaned, flags = state.fusion.update(frame.temps_c, delta)
    screened = TemperatureFrame(frame.time, frame.spacing_m, cleaned, frame.origin_m)
    state.frames.append(screened)
    while state.frames and state.frames[0].time < frame.time - cfg.thermal_window_s - 1e-9:
        state.frames.popleft()
    history = list(state.frames)
    if history[-1].time - history[0].time < cfg.min_rise_span_s:
        history = history[-1:]
    return thermal_features(history), bool(np.any(flags))


def sample_cycle(cfg: ImuConfig, inputs: SensorInputs, state: CycleState | None = None) -> FeatureRecord:
    """Feature extraction for one tick.

    PD capture is denoised and detected, giving the window's max charge and
    phase histogram; the rate comes from the trailing ``rate_window_s``. The
    DTS frame is screened for spurious points before thermal features are
    taken over the trailing ``thermal_window_s``. Current is Verdet
    compensated. A missing sensor sets its quality bit and carries the
    previous tick's values for that channel. ``fsm_state`` is left for the
    caller (see :func:`fsm_step`).
    """
    state = state if state is not None else CycleState()
    prev = state.last
    quality = 0

    if inputs.pd is not None:
        max_charge, rate, hist = _pd_features(cfg, inputs, state)
    else:
        quality |= Quality.PD_UNAVAILABLE
        max_charge, rate, hist = (
            (prev.max_charge_pc, prev.rate_pps, prev.phase_histogram) if prev else (0.0, 0.0, (0,) * N_PHASE_BINS)
        )

    current_a = None
    if inputs.current is not None:
        current_a = compensate_verdet(
            inputs.current.i_focs_a, inputs.current.sensor_temp_c, cfg.verdet_alpha, cfg.verdet_t0_c
        )
    else:
        quality |= Quality.CURRENT_UNAVAILABLE

    if inputs.dts is not None and inputs.dts.temps_c.size:
        feats, spurious = _thermal(cfg, inputs.dts, current_a, state)
        temp, grad, rise = feats.max_temp_c, feats.max_gradient_c_per_m, feats.max_rise_rate_c_per_min
        if spurious:
            quality |= Quality.SPURIOUS_REJECTED
    else:
        quality |= Quality.DTS_UNAVAILABLE
        temp, grad, rise = (
            (prev.max_temp_c, prev.max_gradient_c_per_m, prev.max_rise_rate_c_per_min) if prev else (0.0, 0.0, 0.0)
        )
    if current_a is None:
        current_a = prev.current_a if prev else 0.0
    else:
        state.last_current_a = current_a

    if inputs.vibration is not None and len(inputs.vibration):
        vib = float(np.sqrt(np.mean(np.square(inputs.vibration))))
    else:
        quality |= Quality.VIBRATION_UNAVAILABLE
        vib = prev.vibration_rms if prev else 0.0

    state.seq += 1
    rec = FeatureRecord(
        imu_id=cfg.id,
        seq=state.seq,
        time=inputs.time,
        max_charge_pc=max_charge,
        rate_pps=rate,
        phase_histogram=hist,
        max_temp_c=temp,
        max_gradient_c_per_m=grad,
        max_rise_rate_c_per_min=rise,
        current_a=current_a,
        vibration_rms=vib,
        fsm_state=prev.fsm_state if prev else FsmLevel.NORMAL,
        quality=int(quality),
    )
    state.last = rec
    return rec
