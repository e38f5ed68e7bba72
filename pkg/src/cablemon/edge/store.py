"""Append-only time-series store.

Layout: one directory per series, holding numbered segment files
``00000000.seg``, ``00000001.seg``, ... Only the highest-numbered segment is
ever written; the others are closed and immutable. A segment is a 5-byte
header (``CMTS`` + format version) followed by entries::

    u32 payload length | u32 CRC-32 of payload | payload
    payload = f64 time | u8 kind | f64 value (kind 0) or raw bytes (kind 1)

All integers are big-endian. On open, the tail segment is scanned and cut back
to its last intact entry, so a crash mid-append loses at most that entry.
"""

from __future__ import annotations

import bisect
import math
import os
import struct
import threading
import urllib.parse
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Union

MAGIC = b"CMTS\x01"
_HEAD = struct.Struct(">II")
_TIME_KIND = struct.Struct(">dB")
_F64 = struct.Struct(">d")
KIND_FLOAT = 0
KIND_BYTES = 1

Value = Union[float, bytes]


class StoreError(Exception):
    pass


class OutOfOrderAppend(StoreError):
    """Append with a timestamp earlier than the series' last entry."""


class CorruptSegment(StoreError):
    """A closed segment failed its checksum."""


@dataclass(frozen=True)
class RecoveryReport:
    series: str
    segment: str
    kept_entries: int
    dropped_bytes: int


def _encode(t: float, value: Value) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        payload = _TIME_KIND.pack(t, KIND_BYTES) + bytes(value)
    else:
        payload = _TIME_KIND.pack(t, KIND_FLOAT) + _F64.pack(float(value))
    return _HEAD.pack(len(payload), zlib.crc32(payload)) + payload


def _scan(data: bytes) -> tuple[list[float], list[Value], int]:
    """Entries in a segment body and the offset just past the last intact one."""
    times: list[float] = []
    values: list[Value] = []
    pos = len(MAGIC)
    good = pos
    n = len(data)
    while pos + _HEAD.size <= n:
        length, crc = _HEAD.unpack_from(data, pos)
        start = pos + _HEAD.size
        end = start + length
        if length < _TIME_KIND.size or end > n:
            break
        payload = data[start:end]
        if zlib.crc32(payload) != crc:
            break
        t, kind = _TIME_KIND.unpack_from(payload)
        if kind == KIND_FLOAT:
            if length != _TIME_KIND.size + _F64.size:
                break
            values.append(_F64.unpack_from(payload, _TIME_KIND.size)[0])
        elif kind == KIND_BYTES:
            values.append(payload[_TIME_KIND.size :])
        else:
            break
        times.append(t)
        pos = good = end
    return times, values, good


class _Series:
    def __init__(self, name: str, path: Path):
        self.name = name
        self.path = path
        self.times: list[float] = []
        self.values: list[Value] = []
        self.segment_index = 0
        self.segment_count = 0
        self.segment_first: list[float] = []  # sparse index: first time of each segment
        self.handle = None
        self.lock = threading.Lock()


class TimeSeriesStore:
    def __init__(
        self, root: str | os.PathLike, segment_entries: int = 8192, fsync: bool = False, autoflush: bool = True
    ):
        """``autoflush=False`` leaves writes in the file buffer until :meth:`flush`; ``fsync`` implies autoflush."""
        if segment_entries < 1:
            raise ValueError("segment_entries must be >= 1")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.segment_entries = segment_entries
        self.fsync = fsync
        self.autoflush = autoflush or fsync
        self._series: dict[str, _Series] = {}
        self._lock = threading.Lock()
        self.recovered: list[RecoveryReport] = []
        for d in sorted(p for p in self.root.iterdir() if p.is_dir()):
            name = urllib.parse.unquote(d.name)
            self._series[name] = self._load(name, d)

    @staticmethod
    def _dirname(series: str) -> str:
        if not series:
            raise ValueError("series name must be nonempty")
        return urllib.parse.quote(series, safe="")

    def _load(self, name: str, d: Path) -> _Series:
        s = _Series(name, d)
        segs = sorted(d.glob("*.seg"))
        for i, seg in enumerate(segs):
            data = seg.read_bytes()
            tail = i == len(segs) - 1
            if not data.startswith(MAGIC):
                if tail and len(data) < len(MAGIC):
                    seg.write_bytes(MAGIC)
                    data = MAGIC
                else:
                    raise CorruptSegment(f"{seg}: bad header")
            times, values, good = _scan(data)
            if good != len(data):
                if not tail:
                    raise CorruptSegment(f"{seg}: damaged entry at byte {good}")
                with open(seg, "r+b") as f:
                    f.truncate(good)
                self.recovered.append(RecoveryReport(name, seg.name, len(times), len(data) - good))
            if times:
                s.segment_first.append(times[0])
            s.times.extend(times)
            s.values.extend(values)
            s.segment_index = int(seg.stem)
            s.segment_count = len(times)
        if not segs:
            s.segment_index, s.segment_count = 0, 0
        return s

    def _get(self, series: str, create: bool) -> _Series | None:
        s = self._series.get(series)
        if s is None and create:
            with self._lock:
                s = self._series.get(series)
                if s is None:
                    d = self.root / self._dirname(series)
                    d.mkdir(exist_ok=True)
                    s = _Series(series, d)
                    self._series[series] = s
        return s

    def _segment_path(self, s: _Series) -> Path:
        return s.path / f"{s.segment_index:08d}.seg"

    def append(self, series: str, time: float, value: Value) -> None:
        if not math.isfinite(time):
            raise ValueError("time must be finite")
        s = self._get(series, create=True)
        with s.lock:
            if s.times and time < s.times[-1]:
                raise OutOfOrderAppend(f"{series}: {time!r} < last {s.times[-1]!r}")
            if s.segment_count >= self.segment_entries:
                if s.handle is not None:
                    s.handle.close()
                    s.handle = None
                s.segment_index += 1
                s.segment_count = 0
            if s.handle is None:
                path = self._segment_path(s)
                fresh = not path.exists() or path.stat().st_size == 0
                s.handle = open(path, "ab")
                if fresh:
                    s.handle.write(MAGIC)
            s.handle.write(_encode(time, value))
            if self.autoflush:
                s.handle.flush()
            if self.fsync:
                os.fsync(s.handle.fileno())
            if s.segment_count == 0:
                s.segment_first.append(time)
            s.segment_count += 1
            s.times.append(time)
            s.values.append(value)

    def query(self, series: str, t1: float, t2: float) -> list[tuple[float, Value]]:
        """Entries with ``t1 <= time < t2``, in append order."""
        s = self._get(series, create=False)
        if s is None or t2 <= t1:
            return []
        with s.lock:
            i = bisect.bisect_left(s.times, t1)
            j = bisect.bisect_left(s.times, t2)
            return list(zip(s.times[i:j], s.values[i:j]))

    def last(self, series: str) -> tuple[float, Value] | None:
        s = self._get(series, create=False)
        if s is None or not s.times:
            return None
        with s.lock:
            return s.times[-1], s.values[-1]

    def count(self, series: str) -> int:
        s = self._get(series, create=False)
        return len(s.times) if s else 0

    def series(self, prefix: str = "") -> list[str]:
        return sorted(n for n in self._series if n.startswith(prefix))

    def segments(self, series: str) -> list[Path]:
        s = self._get(series, create=False)
        return sorted(s.path.glob("*.seg")) if s else []

    def flush(self) -> None:
        for s in list(self._series.values()):
            with s.lock:
                if s.handle is not None:
                    s.handle.flush()

    def close(self) -> None:
        for s in self._series.values():
            with s.lock:
                if s.handle is not None:
                    s.handle.close()
                    s.handle = None

    def __enter__(self) -> "TimeSeriesStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def store_append(store: TimeSeriesStore, series: str, time: float, value: Value) -> None:
    store.append(series, time, value)


def store_query(store: TimeSeriesStore, series: str, t1: float, t2: float) -> list[tuple[float, Value]]:
    return store.query(series, t1, t2)
