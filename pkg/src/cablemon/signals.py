"""Sampled-signal containers shared by the simulator, DSP and IMU layers.

Timestamps are float seconds since the Unix epoch (UTC) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class RawWaveform:
    """A contiguous block of HFCT samples in millivolts."""

    sample_rate_hz: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", arr)

    @property
    def duration_s(self) -> float:
        return self.samples.shape[0] / self.sample_rate_hz

    def time_at(self, index: float) -> float:
        return self.start_time + index / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class PdCapture:
    """Segmented HFCT acquisition over ``duration_s``.

    A triggered digitizer keeps fixed-length segments only; everything between
    segments is not recorded. ``segment_starts`` are sample offsets from
    ``start_time``. Segments never overlap.
    """

    sample_rate_hz: float
    start_time: float
    duration_s: float
    segment_starts: np.ndarray
    segments: np.ndarray

    def __post_init__(self) -> None:
        starts = np.asarray(self.segment_starts, dtype=np.int64)
        segs = np.asarray(self.segments, dtype=np.float64)
        if segs.ndim != 2 or segs.shape[0] != starts.shape[0]:
            raise ValueError("segments must be (n_segments, segment_len) matching segment_starts")
        if starts.size > 1 and np.any(np.diff(starts) < segs.shape[1]):
            raise ValueError("segments overlap or are out of order")
        object.__setattr__(self, "segment_starts", starts)
        object.__setattr__(self, "segments", segs)

    @property
    def segment_len(self) -> int:
        return int(self.segments.shape[1])

    def __len__(self) -> int:
        return int(self.segments.shape[0])

    def segment(self, i: int) -> RawWaveform:
        return RawWaveform(
            self.sample_rate_hz,
            self.start_time + self.segment_starts[i] / self.sample_rate_hz,
            self.segments[i],
        )

    def with_segments(self, segments: np.ndarray) -> "PdCapture":
        return PdCapture(
            self.sample_rate_hz, self.start_time, self.duration_s, self.segment_starts, segments
        )

    def to_dense(self, max_samples: int = 50_000_000) -> RawWaveform:
        """Render as one contiguous waveform, zero outside recorded segments."""
        n = int(round(self.duration_s * self.sample_rate_hz))
        if n > max_samples:
            raise ValueError(f"dense rendering needs {n} samples (limit {max_samples})")
        out = np.zeros(n)
        seg_len = self.segment_len
        for start, seg in zip(self.segment_starts, self.segments):
            stop = min(n, int(start) + seg_len)
            out[int(start) : stop] = seg[: stop - int(start)]
        return RawWaveform(self.sample_rate_hz, self.start_time, out)


@dataclass(frozen=True, eq=False)
class TemperatureFrame:
    """One DTS trace: one reading per ``spacing_m`` starting at ``origin_m``."""

    time: float
    spacing_m: float
    temps_c: np.ndarray
    origin_m: float = 0.0
    injected: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.spacing_m <= 0:
            raise ValueError("spacing_m must be positive")
        object.__setattr__(self, "temps_c", np.asarray(self.temps_c, dtype=np.float64))

    def position_of(self, index: int) -> float:
        return self.origin_m + index * self.spacing_m

    def slice_m(self, start_m: float, stop_m: float) -> "TemperatureFrame":
        """Sub-trace covering [start_m, stop_m], clipped to the trace."""
        i0 = max(0, int(np.ceil((start_m - self.origin_m) / self.spacing_m)))
        i1 = min(len(self.temps_c) - 1, int(np.floor((stop_m - self.origin_m) / self.spacing_m)))
        injected = tuple(i - i0 for i in self.injected if i0 <= i <= i1)
        return TemperatureFrame(
            self.time, self.spacing_m, self.temps_c[i0 : i1 + 1].copy(), self.position_of(i0), injected
        )


@dataclass(frozen=True)
class VoltageReference:
    """Power-frequency voltage phase reference."""

    zero_crossing_time: float
    frequency_hz: float = 50.0
    amplitude_v: float = 8165.0

    def __post_init__(self) -> None:
        if self.frequency_hz <= 0:
            raise ValueError("frequency_hz must be positive")
        if self.amplitude_v <= 0:
            raise ValueError("amplitude_v must be positive")


@dataclass(frozen=True)
class CurrentSample:
    time: float
    i_true_a: float
    i_focs_a: float
    i_ct_a: float
    sensor_temp_c: float
