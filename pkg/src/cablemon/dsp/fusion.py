"""Optical current compensation and Kalman fusion of DTS readings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels

VERDET_ALPHA_PER_C = 7e-5
VERDET_T0_C = 25.0
SPURIOUS_GATE_SIGMA = 3.0


def compensate_verdet(
    i_meas_a: float,
    sensor_temp_c: float,
    alpha: float = VERDET_ALPHA_PER_C,
    t0_c: float = VERDET_T0_C,
) -> float:
    """Undo the temperature-dependent scale factor of a Faraday current sensor."""
    divisor = 1.0 + alpha * (sensor_temp_c - t0_c)
    if divisor <= 0:
        raise ValueError(f"degenerate Verdet divisor {divisor!r}")
    return i_meas_a / divisor


@dataclass(frozen=True)
class KalmanState:
    estimate_c: float
    variance: float
    last_innovation: float = 0.0
    spurious_flag: bool = False

    def __post_init__(self) -> None:
        if not self.variance > 0:
            raise ValueError("variance must be positive")


def kalman_fuse(
    prior: KalmanState,
    dts_c: float,
    model_pred_c: float,
    q: float,
    r: float,
    gate: float = SPURIOUS_GATE_SIGMA,
) -> KalmanState:
    """One scalar predict/update step.

    The prediction moves to ``model_pred_c`` with variance ``prior.variance + q``.
    A measurement whose innovation exceeds ``gate`` standard deviations of the
    innovation is flagged spurious and not used.
    """
    if q <= 0 or r <= 0:
        raise ValueError("q and r must be positive")
    est, var, innov, flag = kernels.kalman_step(
        np.array([prior.estimate_c]),
        np.array([prior.variance]),
        np.array([dts_c]),
        np.array([model_pred_c]),
        q,
        r,
        gate,
    )
    return KalmanState(float(est[0]), float(var[0]), float(innov[0]), bool(flag[0]))


class PointwiseFusion:
    """Per-point Kalman screen over successive DTS traces.

    Each sensing point carries its own filter. The model prediction for a point
    is its previous estimate shifted by the modelled temperature change (for
    example from a load change). Spurious points are replaced by the prediction.
    A point rejected ``max_rejects`` times in a row is re-seeded from the
    measurement, so a genuine step is accepted after a short delay.
    """

    def __init__(self, q: float = 0.05, r: float = 1.0, gate: float = SPURIOUS_GATE_SIGMA, max_rejects: int = 3):
        if q <= 0 or r <= 0:
            raise ValueError("q and r must be positive")
        self.q, self.r, self.gate, self.max_rejects = q, r, gate, max_rejects
        self.estimate: np.ndarray | None = None
        self.variance: np.ndarray | None = None
        self.rejects: np.ndarray | None = None

    def reset(self) -> None:
        self.estimate = self.variance = self.rejects = None

    def update(self, measured: np.ndarray, model_delta_c: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Return (cleaned trace, spurious mask)."""
        z = np.asarray(measured, dtype=np.float64)
        if self.estimate is None or self.estimate.shape != z.shape:
            self.estimate = z.copy()
            self.variance = np.full(z.shape, self.r)
            self.rejects = np.zeros(z.shape, dtype=np.int64)
            return z.copy(), np.zeros(z.shape, dtype=bool)
        pred = self.estimate + model_delta_c
        est, var, _, flag = kernels.kalman_step(self.estimate, self.variance, z, pred, self.q, self.r, self.gate)
        self.rejects = np.where(flag, self.rejects + 1, 0)
        reseed = self.rejects >= self.max_rejects
        if np.any(reseed):
            est = np.where(reseed, z, est)
            var = np.where(reseed, self.r, var)
            flag = flag & ~reseed
            self.rejects = np.where(reseed, 0, self.rejects)
        self.estimate, self.variance = est, var
        cleaned = np.where(flag, pred, z)
        return cleaned, flag
