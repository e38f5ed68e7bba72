"""Signal processing: denoising, pulse features, thermal features, sensor fusion."""

from .fusion import KalmanState, PointwiseFusion, compensate_verdet, kalman_fuse
from .pd import PdFeatureSet, extract_pulses, pd_feature_set
from .phase import N_PHASE_BINS, phase_histogram, phase_of, phase_resolve
from .pulses import K_CAL_PC_PER_MV, PulseFeature, charge_from_amplitude, detect_capture, detect_pulses
from .rate import estimate_repetition_rate
from .thermal import ThermalFeatureSet, thermal_features
from .wavelet import denoise_capture, denoise_rows, denoise_wavelet, noise_sigma

__all__ = [
    "K_CAL_PC_PER_MV",
    "KalmanState",
    "N_PHASE_BINS",
    "PdFeatureSet",
    "PointwiseFusion",
    "PulseFeature",
    "ThermalFeatureSet",
    "charge_from_amplitude",
    "compensate_verdet",
    "denoise_capture",
    "denoise_rows",
    "denoise_wavelet",
    "detect_capture",
    "detect_pulses",
    "estimate_repetition_rate",
    "extract_pulses",
    "kalman_fuse",
    "noise_sigma",
    "pd_feature_set",
    "phase_histogram",
    "phase_of",
    "phase_resolve",
    "thermal_features",
]
