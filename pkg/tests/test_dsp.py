"""Signal-processing oracles: wavelet identity, pulse detection at 0 dB, ACF rate,
Verdet compensation and the Kalman screen."""

import math

import numpy as np
import pytest
import pywt
from hypothesis import given
from hypothesis import strategies as st

from cablemon.dsp.fusion import KalmanState, PointwiseFusion, compensate_verdet, kalman_fuse
from cablemon.dsp.pd import extract_pulses, pd_feature_set
from cablemon.dsp.phase import phase_histogram, phase_of
from cablemon.dsp.pulses import charge_from_amplitude
from cablemon.dsp.rate import estimate_repetition_rate
from cablemon.dsp.thermal import thermal_features
from cablemon.dsp.wavelet import denoise_rows, noise_sigma, soft_threshold, universal_threshold, wavedec, waverec
from cablemon.signals import TemperatureFrame, VoltageReference
from cablemon.sim.network import DefectKind, DefectProfile, NoiseSpec
from cablemon.sim.synth import SpuriousSpec, inject_spurious, pulse_schedule, synth_current_sample, synth_pd_capture

MATCH_TOL_S = 200e-9


def closed_form_posterior_variance(q: float, r: float) -> float:
    # steady state of P <- (P + q) r / (P + q + r): the positive root of P^2 + qP - qr = 0
    return (-q + math.sqrt(q * q + 4 * q * r)) / 2


def match_pulses(detected: np.ndarray, injected: np.ndarray, tol: float) -> tuple[int, int, int]:
    """Greedy one-to-one matching in time. Returns (true positives, false positives, false negatives)."""
    detected = np.sort(detected)
    used = np.zeros(detected.size, dtype=bool)
    tp = 0
    for t in np.sort(injected):
        if detected.size == 0:
            continue
        free = np.flatnonzero(~used)
        if free.size == 0:
            break
        k = free[np.argmin(np.abs(detected[free] - t))]
        if abs(detected[k] - t) <= tol:
            used[k] = True
            tp += 1
    return tp, int((~used).sum()), injected.size - tp


# wavelet


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 3, 5]))
def test_wavedec_waverec_identity(seed, levels):
    x = np.random.default_rng(seed).normal(size=(2, 256))
    np.testing.assert_allclose(waverec(wavedec(x, levels)), x, atol=1e-10)


def test_wavedec_matches_pywavelets_multilevel():
    x = np.random.default_rng(0).normal(size=512)
    ours = wavedec(x, 5)
    ref = pywt.wavedec(x, "db4", mode="periodization", level=5)
    for a, b in zip(ours, ref):
        np.testing.assert_allclose(a[0], b, atol=1e-10)


def test_soft_threshold_shrinks_toward_zero():
    c = np.array([-3.0, -1.0, 0.0, 0.5, 2.0])
    np.testing.assert_array_equal(soft_threshold(c, 1.0), [-2.0, 0.0, 0.0, 0.0, 1.0])


def test_universal_threshold_on_pure_noise():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 2.0, size=(1, 4096))
    _, d1 = pywt.dwt(x[0], "db4", mode="periodization")
    lam = universal_threshold(d1, 4096)[0]
    assert lam == pytest.approx(2.0 * math.sqrt(2 * math.log(4096)), rel=0.05)
    assert noise_sigma(x) == pytest.approx(2.0, rel=0.05)


def test_denoise_does_not_add_energy():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(8, 200))
    y = denoise_rows(x, 5)
    assert y.shape == x.shape
    assert np.sum(y**2) <= np.sum(x**2)


def test_denoise_rejects_short_rows():
    with pytest.raises(ValueError):
        denoise_rows(np.zeros((1, 16)), 5)


# pulse detection


def test_detection_at_0db_precision_and_recall():
    tp = fp = fn = 0
    for seed in range(150):
        rng = np.random.default_rng(seed)
        defect = DefectProfile(DefectKind.INTERNAL_VOID, 0.0, float(rng.uniform(300, 1500)), float(rng.uniform(5, 50)))
        cap, train = synth_pd_capture(defect, 1.0, seed, NoiseSpec(pd_snr_db=0.0))
        detected = np.array([p.time for p in extract_pulses(cap)])
        a, b, c = match_pulses(detected, train.times, MATCH_TOL_S)
        tp, fp, fn = tp + a, fp + b, fn + c
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    assert precision >= 0.90, (tp, fp, fn)
    assert recall >= 0.90, (tp, fp, fn)


def test_noise_only_capture_detects_nothing():
    cap, train = synth_pd_capture(DefectProfile(), 1.0, 5, NoiseSpec(pd_sigma_mv=3.0))
    assert len(train) == 0 and len(cap) > 0
    assert extract_pulses(cap) == []


def test_charge_tracks_injected_magnitude():
    defect = DefectProfile(DefectKind.INTERNAL_VOID, 0.0, 1200.0, 12.0)
    cap, _ = synth_pd_capture(defect, 2.0, 9, NoiseSpec(pd_sigma_mv=2.0))
    feats = pd_feature_set(extract_pulses(cap), (0.0, 2.0))
    assert feats.max_charge_pc == pytest.approx(1200.0, rel=0.05)
    assert feats.rate_pps == pytest.approx(12.0, rel=0.05)
    assert charge_from_amplitude(100.0) == pytest.approx(1200.0)


# repetition rate


@pytest.mark.parametrize("seed", range(40))
def test_acf_rate_within_five_percent(seed):
    rng = np.random.default_rng(1000 + seed)
    window = float(rng.choice([1.0, 2.0, 5.0]))
    rate = float(rng.uniform(max(3.0, 10.0 / window), 100.0))  # at least ten pulses in the window
    defect = DefectProfile(DefectKind.INTERNAL_VOID, 0.0, 800.0, rate)
    train = pulse_schedule(defect, 0.0, window, seed)
    assert estimate_repetition_rate(train.times, window) == pytest.approx(rate, rel=0.05)
    cap, _ = synth_pd_capture(defect, window, seed, NoiseSpec(pd_sigma_mv=2.0))
    assert estimate_repetition_rate(extract_pulses(cap), window) == pytest.approx(rate, rel=0.05)


def test_rate_falls_back_to_count_for_few_pulses():
    assert estimate_repetition_rate([], 1.0) == 0.0
    assert estimate_repetition_rate([0.1, 0.6], 2.0) == 1.0
    with pytest.raises(ValueError):
        estimate_repetition_rate([0.1], 0.0)


# phase


def test_phase_histogram_bins():
    ref = VoltageReference(0.0, 50.0)
    assert phase_of(0.005, ref) == pytest.approx(90.0)
    assert phase_of(0.02, ref) == pytest.approx(0.0, abs=1e-9)
    hist = phase_histogram([0.0, 9.99, 10.0, 359.9])
    assert hist[0] == 2 and hist[1] == 1 and hist[35] == 1 and hist.sum() == 4


# Verdet


@given(st.floats(-2000, 2000), st.floats(-40, 120), st.floats(1e-6, 1e-3))
def test_verdet_round_trip(load, sensor_temp, alpha):
    sample = synth_current_sample(load, sensor_temp, 0.0, alpha=alpha, t0_c=25.0, ct_saturation_a=1e9)
    back = compensate_verdet(sample.i_focs_a, sensor_temp, alpha=alpha, t0_c=25.0)
    assert abs(back - load) <= 1e-9 * max(1.0, abs(load))


def test_verdet_degenerate_divisor():
    with pytest.raises(ValueError):
        compensate_verdet(100.0, -1e6, alpha=1e-3)


# Kalman


@pytest.mark.parametrize("q,r", [(0.05, 1.0), (0.01, 0.5), (0.2, 2.0)])
def test_posterior_variance_reaches_closed_form(q, r):
    state = KalmanState(20.0, r)
    for _ in range(500):
        state = kalman_fuse(state, 20.0, state.estimate_c, q, r)
    assert state.variance == pytest.approx(closed_form_posterior_variance(q, r), abs=1e-6)


def test_pointwise_fusion_variance_reaches_closed_form():
    fusion = PointwiseFusion(q=0.05, r=1.0)
    for _ in range(500):
        fusion.update(np.full(20, 30.0))
    np.testing.assert_allclose(fusion.variance, closed_form_posterior_variance(0.05, 1.0), atol=1e-6)
    assert closed_form_posterior_variance(0.05, 1.0) == pytest.approx(0.2)


def test_kalman_flags_every_large_outlier():
    """Deterministic suite: single-frame spikes of 25-40 C on noisy traces, none may slip through."""
    missed = flagged = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = 300
        base = 30.0 + 5.0 * np.sin(np.arange(n) / 40.0)
        fusion = PointwiseFusion(q=0.05, r=1.0)
        sigma = float(rng.uniform(0.05, 0.5))
        for step in range(120):
            frame = TemperatureFrame(float(step), 1.0, base + rng.normal(0, sigma, n))
            if step >= 20 and step % 7 == 0:
                spec = SpuriousSpec(count=int(rng.integers(1, 6)), magnitude_c=float(rng.uniform(25.0, 40.0)))
                frame = inject_spurious(frame, spec, seed * 1000 + step)
            _, flags = fusion.update(frame.temps_c)
            for i in frame.injected:
                flagged += bool(flags[i])
                missed += not flags[i]
    assert flagged > 0
    assert missed == 0


def test_kalman_false_alarm_rate_is_low():
    rng = np.random.default_rng(7)
    fusion = PointwiseFusion()
    flags = 0
    for step in range(200):
        _, f = fusion.update(25.0 + rng.normal(0, 0.5, 500))
        flags += int(f.sum())
    assert flags / (200 * 500) < 0.01


def test_genuine_step_is_accepted_after_rejects():
    fusion = PointwiseFusion(max_rejects=3)
    fusion.update(np.full(4, 30.0))
    outs = [fusion.update(np.full(4, 60.0))[1].any() for _ in range(4)]
    assert outs == [True, True, False, False]


def test_kalman_rejects_bad_parameters():
    with pytest.raises(ValueError):
        kalman_fuse(KalmanState(0.0, 1.0), 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        KalmanState(0.0, 0.0)


# thermal features


def test_thermal_features_oracle():
    t0 = TemperatureFrame(0.0, 1.0, np.array([20.0, 20.0, 20.0, 20.0]), origin_m=100.0)
    t1 = TemperatureFrame(60.0, 1.0, np.array([20.0, 26.0, 23.0, 19.0]), origin_m=100.0)
    f = thermal_features([t0, t1])
    assert f.max_temp_c == 26.0 and f.hotspot_position_m == 101.0
    assert f.max_gradient_c_per_m == 6.0 and f.gradient_position_m == 100.5
    assert f.max_rise_rate_c_per_min == 6.0 and f.rise_position_m == 101.0


def test_thermal_cooling_is_not_a_rise():
    t0 = TemperatureFrame(0.0, 1.0, np.array([40.0, 40.0]))
    t1 = TemperatureFrame(30.0, 1.0, np.array([30.0, 30.0]))
    assert thermal_features([t0, t1]).max_rise_rate_c_per_min == 0.0


def test_thermal_frames_must_align():
    with pytest.raises(ValueError):
        thermal_features([TemperatureFrame(0.0, 1.0, np.zeros(3)), TemperatureFrame(1.0, 1.0, np.zeros(4))])
    with pytest.raises(ValueError):
        thermal_features([])
