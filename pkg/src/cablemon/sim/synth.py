"""Seeded synthesis of raw sensor signals.

Every function is pure: the same arguments give bit-identical output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..signals import CurrentSample, PdCapture, RawWaveform, TemperatureFrame, VoltageReference
from .network import Activation, CableCircuit, DefectKind, DefectProfile, NoiseSpec

PULSE_WIDTH_NS = (10.0, 100.0)
ARRIVAL_JITTER = 0.2
SURFACE_PHASE_JITTER_DEG = 15.0
HOTSPOT_SIGMA_M = 1.0
HOTSPOT_HALF_SPAN_M = 3.0
VIBRATION_LINE_HZ = 100.0
_BLOCK = 256
_EMI_SAMPLES = 24


def stable_key(*parts: object) -> int:
    """32-bit key from arbitrary labels; stable across processes, unlike ``hash``."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class PulseTrain:
    """Ground truth of the pulses injected into one capture window."""

    times: np.ndarray
    amplitudes_mv: np.ndarray
    widths_ns: np.ndarray

    def __len__(self) -> int:
        return int(self.times.shape[0])


def _block_draws(seed: int, defect_key: int, block: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, defect_key, block])
    jitter = rng.uniform(-ARRIVAL_JITTER, ARRIVAL_JITTER, _BLOCK)
    extra = rng.uniform(0.0, 1.0, (_BLOCK, 2))
    return jitter, extra


def pulse_schedule(
    defect: DefectProfile,
    t_from: float,
    t_to: float,
    seed: int,
    *,
    active_since: float = 0.0,
    k_cal: float = 12.0,
    voltage_ref: VoltageReference | None = None,
    defect_key: int = 0,
) -> PulseTrain:
    """Pulses of ``defect`` arriving in [t_from, t_to).

    Arrivals are jittered periodic from ``active_since``: pulse k sits at
    ``active_since + (k + 0.5 + jitter_k) / rate`` with jitter uniform in
    +-20% of the period. Each pulse's draws depend only on (seed, k), so
    consecutive windows join into one continuous train.
    """
    rate = defect.pd_rate_pps
    amp = defect.pd_magnitude_pc / k_cal
    empty = PulseTrain(np.zeros(0), np.zeros(0), np.zeros(0))
    if rate <= 0 or amp <= 0 or t_to <= t_from:
        return empty
    period = 1.0 / rate
    lock = defect.kind is DefectKind.SURFACE_DISCHARGE
    ref = voltage_ref or VoltageReference(active_since)
    # a snapped surface pulse moves by at most a quarter mains cycle
    slack = (ARRIVAL_JITTER + 0.5) * period + (0.5 / ref.frequency_hz if lock else 0.0)
    k_lo = max(0, int(np.floor((t_from - active_since - slack) / period)))
    k_hi = int(np.ceil((t_to - active_since + slack) / period))
    if k_hi < k_lo:
        return empty
    ks = np.arange(k_lo, k_hi + 1)
    jitter = np.empty(ks.size)
    extra = np.empty((ks.size, 2))
    for block in range(k_lo // _BLOCK, k_hi // _BLOCK + 1):
        j, e = _block_draws(seed, defect_key, block)
        sel = (ks // _BLOCK) == block
        jitter[sel] = j[ks[sel] % _BLOCK]
        extra[sel] = e[ks[sel] % _BLOCK]
    times = active_since + (ks + 0.5 + jitter) * period
    if lock:
        f = ref.frequency_hz
        cycles = (times - ref.zero_crossing_time) * f
        # nearest voltage peak (90 or 270 degrees), then a small phase spread
        h = np.round(2.0 * cycles - 0.5)
        phase_jit = (extra[:, 1] * 2.0 - 1.0) * SURFACE_PHASE_JITTER_DEG / 360.0
        times = ref.zero_crossing_time + ((h + 0.5) / 2.0 + phase_jit) / f
    widths = PULSE_WIDTH_NS[0] + extra[:, 0] * (PULSE_WIDTH_NS[1] - PULSE_WIDTH_NS[0])
    keep = (times >= t_from) & (times < t_to) & (times >= active_since)
    times, widths = times[keep], widths[keep]
    order = np.argsort(times, kind="stable")
    return PulseTrain(times[order], np.full(order.size, amp), widths[order])


def _gaussian_pulse(n_rel: np.ndarray, amp: float, width_ns: float, fs: float) -> np.ndarray:
    sigma = width_ns * 1e-9 * fs / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    return amp * np.exp(-0.5 * (n_rel / sigma) ** 2)


def _emi_packet(rng: np.random.Generator, amp: float, fs: float) -> np.ndarray:
    """Short wideband burst: windowed random-frequency carrier."""
    n = np.arange(_EMI_SAMPLES)
    f = rng.uniform(5e6, 40e6)
    phase = rng.uniform(0, 2 * np.pi)
    return amp * np.hanning(_EMI_SAMPLES) * np.sin(2 * np.pi * f * n / fs + phase)


def _place_segments(events: np.ndarray, n_total: int, seg_len: int, pretrigger: int) -> np.ndarray:
    starts: list[int] = []
    end = -1
    for idx in np.sort(events):
        idx = int(idx)
        if idx < end:
            continue
        s = max(idx - pretrigger, end if end > 0 else 0, 0)
        s = min(s, max(n_total - seg_len, 0))
        if starts and s < end:
            continue
        starts.append(s)
        end = s + seg_len
    return np.asarray(starts, dtype=np.int64)


def synth_pd_capture(
    defect: DefectProfile,
    duration_s: float,
    seed: int,
    noise: NoiseSpec,
    *,
    start_time: float = 0.0,
    active_since: float | None = None,
    sample_rate_hz: float = 100e6,
    k_cal: float = 12.0,
    trigger_mv: float = 5.0,
    segment_len: int = 256,
    pretrigger: int = 64,
    voltage_ref: VoltageReference | None = None,
    defect_key: int = 0,
) -> tuple[PdCapture, PulseTrain]:
    """Segmented HFCT capture of one window plus its injection log.

    Segments open on pulses at or above ``trigger_mv`` and at a fixed cadence
    of noise-only baseline triggers. With ``noise.pd_snr_db`` set, the noise
    level is chosen so the power ratio over the pulse-bearing segments matches.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    fs = sample_rate_hz
    since = start_time if active_since is None else active_since
    train = pulse_schedule(
        defect,
        start_time,
        start_time + duration_s,
        seed,
        active_since=since,
        k_cal=k_cal,
        voltage_ref=voltage_ref,
        defect_key=defect_key,
    )
    n_total = int(round(duration_s * fs))
    rng = np.random.default_rng([seed, defect_key, stable_key("capture", round(start_time * 1e6))])

    pulse_idx = np.rint((train.times - start_time) * fs).astype(np.int64)
    n_base = int(np.floor(noise.baseline_segments_per_s * duration_s))
    base_idx = (
        ((np.arange(n_base) + rng.uniform(0.1, 0.9)) * (n_total / n_base)).astype(np.int64) if n_base else np.zeros(0, np.int64)
    )
    n_emi = rng.poisson(noise.emi_rate_hz * duration_s) if noise.emi_rate_hz > 0 else 0
    emi_idx = np.sort(rng.integers(0, max(n_total - _EMI_SAMPLES, 1), n_emi)) if n_emi else np.zeros(0, np.int64)
    emi_packets = [_emi_packet(rng, noise.emi_amplitude_mv, fs) for _ in range(n_emi)]

    triggers = [pulse_idx[train.amplitudes_mv >= trigger_mv], base_idx]
    if noise.emi_amplitude_mv >= trigger_mv:
        triggers.append(emi_idx + _EMI_SAMPLES // 2)
    starts = _place_segments(np.concatenate(triggers), n_total, segment_len, pretrigger)

    clean = np.zeros((starts.size, segment_len))
    carries = np.zeros(starts.size, dtype=bool)
    if starts.size:
        seg_of = lambda i: np.searchsorted(starts, i, side="right") - 1  # noqa: E731
        reach = int(np.ceil(4 * PULSE_WIDTH_NS[1] * 1e-9 * fs))
        offs = np.arange(-reach, reach + 1)
        for idx, amp, width in zip(pulse_idx, train.amplitudes_mv, train.widths_ns):
            shape = _gaussian_pulse(offs.astype(np.float64), amp, width, fs)
            for s in {seg_of(idx - reach), seg_of(idx), seg_of(idx + reach)}:
                if s < 0:
                    continue
                rel = idx + offs - starts[s]
                ok = (rel >= 0) & (rel < segment_len)
                if np.any(ok):
                    clean[s, rel[ok]] += shape[ok]
                    if 0 <= idx - starts[s] < segment_len:
                        carries[s] = True
        for idx, pkt in zip(emi_idx, emi_packets):
            s = seg_of(idx)
            for cand in (s, s + 1):
                if 0 <= cand < starts.size:
                    rel = idx + np.arange(_EMI_SAMPLES) - starts[cand]
                    ok = (rel >= 0) & (rel < segment_len)
                    clean[cand, rel[ok]] += pkt[ok]

    sigma = noise.pd_sigma_mv
    if noise.pd_snr_db is not None and np.any(carries):
        power = float(np.mean(clean[carries] ** 2))
        sigma = float(np.sqrt(power / 10 ** (noise.pd_snr_db / 10.0)))
    segs = clean + rng.normal(0.0, sigma, clean.shape) if sigma > 0 else clean
    return PdCapture(fs, start_time, duration_s, starts, segs), train


def synth_pd_waveform(
    defect: DefectProfile,
    duration_s: float,
    seed: int,
    noise: NoiseSpec,
    **kwargs,
) -> RawWaveform:
    """Contiguous waveform (zeros between segments). Short windows only; see :func:`synth_pd_capture`."""
    capture, _ = synth_pd_capture(defect, duration_s, seed, noise, **kwargs)
    return capture.to_dense()


def baseline_temperature(circuit: CableCircuit, load_a: float) -> float:
    return circuit.ambient_c + circuit.k_th * load_a**2


def hotspot_bump(positions_m: np.ndarray, center_m: float, height_c: float) -> np.ndarray:
    d = positions_m - center_m
    return np.where(np.abs(d) <= HOTSPOT_HALF_SPAN_M, height_c * np.exp(-0.5 * (d / HOTSPOT_SIGMA_M) ** 2), 0.0)


def synth_temperature_frame(
    circuit: CableCircuit,
    load_a: float,
    defects: list[Activation] | tuple[Activation, ...],
    t: float,
    *,
    spacing_m: float = 1.0,
    noise_sigma_c: float = 0.0,
    seed: int = 0,
) -> TemperatureFrame:
    """One DTS trace along the whole circuit at time ``t``."""
    if load_a < 0:
        raise ValueError("load_a must be nonnegative")
    n = int(np.floor(circuit.length_m / spacing_m)) + 1
    x = np.arange(n) * spacing_m
    temps = np.full(n, baseline_temperature(circuit, load_a))
    for act in defects:
        d = act.defect
        if not act.active(t) or (d.hotspot_delta_c == 0 and d.hotspot_ramp_c_per_min == 0):
            continue
        height = d.hotspot_delta_c + d.hotspot_ramp_c_per_min * act.minutes_elapsed(t)
        temps = temps + hotspot_bump(x, d.position_m, height)
    if noise_sigma_c > 0:
        rng = np.random.default_rng([seed, stable_key("dts", circuit.id, round(t * 1e3))])
        temps = temps + rng.normal(0.0, noise_sigma_c, n)
    return TemperatureFrame(t, spacing_m, temps)


def synth_current_sample(
    load_a: float,
    sensor_temp_c: float,
    t: float,
    *,
    alpha: float = 7e-5,
    t0_c: float = 25.0,
    ct_saturation_a: float = 600.0,
) -> CurrentSample:
    """True load current as seen by the optical sensor (with drift) and by a saturating CT."""
    i_focs = load_a * (1.0 + alpha * (sensor_temp_c - t0_c))
    i_ct = float(np.clip(load_a, -ct_saturation_a, ct_saturation_a))
    return CurrentSample(t, float(load_a), i_focs, i_ct, float(sensor_temp_c))


@dataclass(frozen=True)
class SpuriousSpec:
    """Outliers to inject: explicit ``indices`` or ``count`` random points."""

    indices: tuple[int, ...] = ()
    count: int = 0
    magnitude_c: float = 25.0


def inject_spurious(frame: TemperatureFrame, spec: SpuriousSpec, seed: int) -> TemperatureFrame:
    n = frame.temps_c.shape[0]
    for i in spec.indices:
        if not 0 <= i < n:
            raise IndexError(f"spurious index {i} out of range for {n} points")
    if spec.count < 0 or spec.count > n:
        raise ValueError(f"spurious count {spec.count} out of range for {n} points")
    chosen = list(spec.indices)
    if spec.count:
        rng = np.random.default_rng([seed, stable_key("spurious", round(frame.time * 1e3))])
        pool = np.setdiff1d(np.arange(n), chosen)
        chosen += [int(i) for i in rng.choice(pool, size=min(spec.count, pool.size), replace=False)]
    if not chosen:
        return frame
    temps = frame.temps_c.copy()
    temps[chosen] += spec.magnitude_c
    return TemperatureFrame(
        frame.time, frame.spacing_m, temps, frame.origin_m, tuple(sorted(set(frame.injected) | set(chosen)))
    )


def synth_vibration(
    n_samples: int,
    sampling_hz: float,
    baseline_rms: float,
    defect_rms: float,
    seed: int,
    t: float,
) -> np.ndarray:
    """Accelerometer block: broadband baseline plus a line-frequency component of ``defect_rms``."""
    rng = np.random.default_rng([seed, stable_key("vib", round(t * 1e3))])
    n = np.arange(n_samples)
    sig = rng.normal(0.0, baseline_rms, n_samples)
    if defect_rms > 0:
        phase = rng.uniform(0, 2 * np.pi)
        # keep the line well below Nyquist at low sampling rates
        f = VIBRATION_LINE_HZ if sampling_hz >= 4 * VIBRATION_LINE_HZ else 0.2437 * sampling_hz
        sig = sig + defect_rms * np.sqrt(2.0) * np.sin(2 * np.pi * f * n / sampling_hz + phase)
    return sig
