"""Diagnostic accuracy of the pipeline over a labeled corpus."""

from __future__ import annotations

import tempfile
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import LABELS, CorpusEntry, LabeledCorpus, load_corpus
from .runner import run_scenario


@dataclass(frozen=True)
class Outcome:
    entry: CorpusEntry
    predicted: str

    @property
    def correct(self) -> bool:
        return self.predicted == self.entry.label


@dataclass(frozen=True)
class AccuracyReport:
    outcomes: tuple[Outcome, ...]

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def accuracy(self) -> float:
        return sum(o.correct for o in self.outcomes) / self.n

    def subset(self, band: str) -> "AccuracyReport":
        return AccuracyReport(tuple(o for o in self.outcomes if o.entry.band == band))

    def confusion(self) -> dict[str, dict[str, int]]:
        """``confusion[truth][predicted]`` counts."""
        m = {t: {p: 0 for p in LABELS} for t in LABELS}
        for o in self.outcomes:
            m[o.entry.label][o.predicted] += 1
        return m

    def errors(self) -> list[Outcome]:
        return [o for o in self.outcomes if not o.correct]

    def to_json(self) -> dict:
        bands = {}
        for band in sorted({o.entry.band for o in self.outcomes}):
            sub = self.subset(band)
            bands[band] = {"n": sub.n, "accuracy": sub.accuracy}
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "denominator": "scenarios",
            "bands": bands,
            "confusion": self.confusion(),
            "errors": [
                {**o.entry.to_json(), "predicted": o.predicted} for o in self.errors()
            ],
        }


def _classify(path: Path, workdir: Path) -> str:
    return run_scenario(path, workdir, artifacts=False).diagnosis["label"]


def evaluate_accuracy(
    corpus: LabeledCorpus | str | Path,
    *,
    workdir: str | Path | None = None,
    jobs: int = 1,
    progress: Callable[[int, int, Outcome], None] | None = None,
) -> AccuracyReport:
    """Run every scenario and compare the classified label with the manifest's.

    Scenarios are independent, so ``jobs > 1`` spreads them over worker
    processes; the result does not depend on ``jobs``.
    """
    if not isinstance(corpus, LabeledCorpus):
        corpus = load_corpus(corpus)
    if not corpus.entries:
        raise ValueError("corpus is empty")
    outcomes = []
    with tempfile.TemporaryDirectory(prefix="cablemon-eval-") as tmp:
        base = Path(workdir) if workdir is not None else Path(tmp)
        args = [(corpus.path(e), base / Path(e.file).stem) for e in corpus.entries]
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as pool:
                labels = pool.map(_classify, *zip(*args))
                for i, (entry, label) in enumerate(zip(corpus.entries, labels)):
                    outcomes.append(Outcome(entry, label))
                    if progress:
                        progress(i + 1, len(corpus.entries), outcomes[-1])
        else:
            for i, (entry, (path, wd)) in enumerate(zip(corpus.entries, args)):
                outcomes.append(Outcome(entry, _classify(path, wd)))
                if progress:
                    progress(i + 1, len(corpus.entries), outcomes[-1])
    return AccuracyReport(tuple(outcomes))
