"""Time-series store against a naive in-memory reference, plus crash recovery."""

import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, precondition, rule

from cablemon.edge.store import MAGIC, CorruptSegment, OutOfOrderAppend, TimeSeriesStore

WORKLOAD_OPS = 100_000


class NaiveStore:
    """Lists of (time, value) per series, scanned in full on every query."""

    def __init__(self):
        self.data: dict[str, list] = {}

    def append(self, series, t, v):
        rows = self.data.setdefault(series, [])
        if rows and t < rows[-1][0]:
            raise OutOfOrderAppend(series)
        rows.append((t, v))

    def query(self, series, t1, t2):
        return [(t, v) for t, v in self.data.get(series, []) if t1 <= t < t2]

    def last(self, series):
        rows = self.data.get(series)
        return rows[-1] if rows else None

    def count(self, series):
        return len(self.data.get(series, []))


def run_workload(store, ref, n_ops, seed):
    rng = np.random.default_rng(seed)
    names = [f"imu-{i}/metric/{'pd' if i % 2 else 'temp'}" for i in range(16)]
    clock = {n: 0.0 for n in names}
    mismatches = 0
    for op in range(n_ops):
        name = names[int(rng.integers(len(names)))]
        r = rng.random()
        if r < 0.65:
            step = 0.0 if rng.random() < 0.1 else float(rng.exponential(1.0))  # ties are legal
            t = clock[name] + step
            v = float(rng.normal()) if rng.random() < 0.7 else rng.bytes(int(rng.integers(0, 24)))
            store.append(name, t, v)
            ref.append(name, t, v)
            clock[name] = t
        elif r < 0.68:
            if clock[name] > 0:
                t = clock[name] - float(rng.uniform(1e-6, 1.0))
                for target in (store, ref):
                    with pytest.raises(OutOfOrderAppend):
                        target.append(name, t, 0.0)
        elif r < 0.95:
            a, b = sorted(rng.uniform(-1.0, clock[name] + 1.0, 2))
            if rng.random() < 0.1:
                a, b = -math.inf, math.inf
            mismatches += store.query(name, a, b) != ref.query(name, a, b)
        else:
            mismatches += store.last(name) != ref.last(name) or store.count(name) != ref.count(name)
    return mismatches


def test_randomized_workload_matches_reference(tmp_path):
    ref = NaiveStore()
    with TimeSeriesStore(tmp_path / "db", segment_entries=256) as store:
        assert run_workload(store, ref, WORKLOAD_OPS, seed=2024) == 0
    # everything written must read back identically after reopening
    with TimeSeriesStore(tmp_path / "db", segment_entries=256) as reopened:
        assert reopened.recovered == []
        assert sorted(reopened.series()) == sorted(ref.data)
        for name in ref.data:
            assert reopened.query(name, -math.inf, math.inf) == ref.query(name, -math.inf, math.inf)
            assert len(reopened.segments(name)) == -(-ref.count(name) // 256)


def entry_offsets(path):
    """Byte offsets where each entry of a segment ends."""
    data = path.read_bytes()
    pos, ends = len(MAGIC), []
    while pos < len(data):
        length = int.from_bytes(data[pos : pos + 4], "big")
        pos += 8 + length
        ends.append(pos)
    return ends


def write_series(root, n, segment_entries=1000):
    with TimeSeriesStore(root, segment_entries=segment_entries) as store:
        for i in range(n):
            store.append("s", float(i), float(i) * 0.5 if i % 3 else f"blob-{i}".encode())
        return store.segments("s")[-1]


def test_truncated_tail_loses_only_the_partial_entry(tmp_path):
    seg = write_series(tmp_path / "base", 40)
    ends = entry_offsets(seg)
    full = seg.read_bytes()
    # every cut strictly inside the final entry
    for cut in range(ends[-2] + 1, ends[-1]):
        root = tmp_path / f"cut{cut}"
        target = write_series(root, 40)
        target.write_bytes(full[:cut])
        with TimeSeriesStore(root) as store:
            rows = store.query("s", -math.inf, math.inf)
            assert [t for t, _ in rows] == [float(i) for i in range(39)]
            assert store.recovered and store.recovered[0].dropped_bytes == cut - ends[-2]
            store.append("s", 39.0, 1.0)
        with TimeSeriesStore(root) as store:
            assert store.count("s") == 40 and store.recovered == []


@pytest.mark.parametrize("seed", range(20))
def test_arbitrary_tail_cut_keeps_every_complete_entry(tmp_path, seed):
    seg = write_series(tmp_path, 30, segment_entries=12)
    ends = entry_offsets(seg)
    data = seg.read_bytes()
    cut = int(np.random.default_rng(seed).integers(0, len(data)))
    seg.write_bytes(data[:cut])
    complete_in_tail = sum(e <= cut for e in ends)
    with TimeSeriesStore(tmp_path, segment_entries=12) as store:
        assert store.count("s") == 24 + complete_in_tail


def test_damaged_closed_segment_is_reported(tmp_path):
    write_series(tmp_path, 30, segment_entries=10)
    first = sorted((tmp_path / "s").glob("*.seg"))[0]
    data = bytearray(first.read_bytes())
    data[20] ^= 0xFF
    first.write_bytes(bytes(data))
    with pytest.raises(CorruptSegment):
        TimeSeriesStore(tmp_path, segment_entries=10)


def test_flush_makes_buffered_writes_visible(tmp_path):
    store = TimeSeriesStore(tmp_path, autoflush=False)
    store.append("x", 1.0, 2.0)
    store.flush()
    assert TimeSeriesStore(tmp_path).query("x", 0, 10) == [(1.0, 2.0)]
    store.close()


def test_rejects_bad_input(tmp_path):
    with TimeSeriesStore(tmp_path) as store:
        with pytest.raises(ValueError):
            store.append("x", math.nan, 1.0)
        with pytest.raises(ValueError):
            store.append("", 1.0, 1.0)
        assert store.query("missing", 0, 1) == [] and store.last("missing") is None
        store.append("a/b c", 1.0, 1.0)
        assert store.series("a/") == ["a/b c"]


class StoreMachine(RuleBasedStateMachine):
    """Interleaved appends, reopens and queries never diverge from the reference."""

    def __init__(self):
        super().__init__()
        import tempfile

        self.tmp = tempfile.TemporaryDirectory()
        self.ref = NaiveStore()
        self.store = None

    @initialize(seg=st.integers(1, 5))
    def open(self, seg):
        self.seg = seg
        self.store = TimeSeriesStore(self.tmp.name, segment_entries=seg)

    @rule(name=st.sampled_from(["a", "b"]), dt=st.floats(0, 10), v=st.floats(-1e6, 1e6) | st.binary(max_size=8))
    def append(self, name, dt, v):
        last = self.ref.last(name)
        t = (last[0] if last else 0.0) + dt
        self.store.append(name, t, v)
        self.ref.append(name, t, v)

    @precondition(lambda self: self.store is not None)
    @rule()
    def reopen(self):
        self.store.close()
        self.store = TimeSeriesStore(self.tmp.name, segment_entries=self.seg)

    @rule(name=st.sampled_from(["a", "b"]), a=st.floats(-5, 60), b=st.floats(-5, 60))
    def query(self, name, a, b):
        assert self.store.query(name, a, b) == self.ref.query(name, a, b)

    @invariant()
    def counts_agree(self):
        if self.store is not None:
            for name in ("a", "b"):
                assert self.store.count(name) == self.ref.count(name)

    def teardown(self):
        if self.store is not None:
            self.store.close()
        self.tmp.cleanup()


TestStoreMachine = StoreMachine.TestCase
TestStoreMachine.settings = settings(max_examples=60, stateful_step_count=30, deadline=None)
