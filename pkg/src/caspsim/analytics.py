"""Per-epoch confidence traces and vulnerability scores.

A trace holds, for every sample of a task, the surrogate's softmax
probability of the true label after each training epoch.  Class and sample
vulnerability is the population standard deviation of that signal over
epochs (class level: of the class-mean confidence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import ModelParams, target_confidences
from .stream import SampleSet


class ClassScore(NamedTuple):
    class_id: int
    mean_confidence: float
    vulnerability: float


class SampleScore(NamedTuple):
    sample_id: int
    mean_confidence: float
    vulnerability: float


class ConfidenceTrace:
    """n samples x E epochs of target-class confidences, filled column-wise."""

    def __init__(self, sample_ids, labels, epochs: int):
        if epochs < 1:
            raise ValueError("a trace needs room for at least one epoch")
        self.sample_ids = np.asarray(sample_ids, dtype=np.int64).copy()
        self.labels = np.asarray(labels, dtype=np.int64).copy()
        if self.sample_ids.shape != self.labels.shape:
            raise ValueError("sample_ids and labels differ in length")
        self.capacity = epochs
        self._values = np.zeros((len(self.sample_ids), epochs))
        self.epochs = 0

    @classmethod
    def for_samples(cls, samples: SampleSet, epochs: int) -> "ConfidenceTrace":
        return cls(samples.ids, samples.labels, epochs)

    @classmethod
    def from_values(cls, sample_ids, labels, values) -> "ConfidenceTrace":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError("values must be an (n, E>=1) matrix")
        tr = cls(sample_ids, labels, values.shape[1])
        for col in values.T:
            tr.append_column(col)
        return tr

    @property
    def values(self) -> np.ndarray:
        v = self._values[:, :self.epochs]
        v.flags.writeable = False
        return v

    def __len__(self) -> int:
        return len(self.sample_ids)

    def append_column(self, column) -> None:
        column = np.asarray(column, dtype=np.float64)
        if self.epochs >= self.capacity:
            raise ValueError(f"trace already holds all {self.capacity} epochs")
        if column.shape != (len(self),):
            raise ValueError("column length does not match the trace")
        if np.any(column < 0) or np.any(column > 1) or not np.all(np.isfinite(column)):
            raise ValueError("confidences must lie in [0, 1]")
        self._values[:, self.epochs] = column
        self.epochs += 1

    def record_epoch(self, params: ModelParams, samples: SampleSet,
                     labels=None) -> "ConfidenceTrace":
        """Append one column of target confidences under ``params``.

        ``labels`` overrides the label used to index the model output (the
        surrogate works in task-local class indices).
        """
        if not np.array_equal(samples.ids, self.sample_ids):
            raise ValueError("samples are not in trace order")
        y = samples.labels if labels is None else labels
        self.append_column(target_confidences(params, samples.features, y))
        return self

    def classes(self) -> list[int]:
        return sorted(set(self.labels.tolist()))

    def _require_epochs(self):
        if self.epochs == 0 or len(self) == 0:
            raise ValueError("trace is empty")

    def class_confidence(self, class_id: int, epoch: int) -> float:
        mask = self.labels == class_id
        if not mask.any():
            raise ValueError(f"class {class_id} not in trace")
        if not 0 <= epoch < self.epochs:
            raise ValueError(f"epoch {epoch} not recorded")
        return float(self._values[mask, epoch].mean())

    def class_curves(self) -> dict[int, np.ndarray]:
        """Class-mean confidence per recorded epoch."""
        self._require_epochs()
        v = self.values
        return {c: v[self.labels == c].mean(axis=0) for c in self.classes()}

    def class_scores(self) -> list[ClassScore]:
        return [ClassScore(c, float(curve.mean()), float(curve.std()))
                for c, curve in self.class_curves().items()]

    def sample_scores(self) -> list[SampleScore]:
        self._require_epochs()
        v = self.values
        means, stds = v.mean(axis=1), v.std(axis=1)
        return [SampleScore(int(i), float(m), float(s))
                for i, m, s in zip(self.sample_ids, means, stds)]

    def dump(self, path) -> None:
        """One row per sample: id, label, then one column per epoch."""
        with open(path, "w") as fh:
            cols = ",".join(f"e{e}" for e in range(self.epochs))
            fh.write(f"id,label,{cols}\n")
            for i, y, row in zip(self.sample_ids, self.labels, self.values):
                fh.write(f"{i},{y}," + ",".join(f"{x:.6f}" for x in row) + "\n")


def class_scores(trace: ConfidenceTrace) -> list[ClassScore]:
    return trace.class_scores()


def sample_scores(trace: ConfidenceTrace) -> list[SampleScore]:
    return trace.sample_scores()


@dataclass(frozen=True)
class Categories:
    simple: list[int]
    hard: list[int]
    challenging: list[int]


def rank_ids(ids: np.ndarray, key: np.ndarray, descending: bool) -> np.ndarray:
    """Ids ordered by ``key`` with ties going to the smaller id."""
    ids = np.asarray(ids)
    k = -np.asarray(key, dtype=np.float64) if descending else np.asarray(key, dtype=np.float64)
    return ids[np.lexsort((ids, k))]


def categorize_samples(scores: Sequence[SampleScore], fraction: float) -> Categories:
    """Top ceil(q n) samples by mean (simple), bottom by mean (hard), top by
    vulnerability (challenging).  The groups may overlap."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    if not scores:
        raise ValueError("no scores to categorize")
    n = len(scores)
    k = math.ceil(fraction * n)
    ids = np.array([s.sample_id for s in scores], dtype=np.int64)
    means = np.array([s.mean_confidence for s in scores])
    vul = np.array([s.vulnerability for s in scores])
    return Categories(simple=rank_ids(ids, means, True)[:k].tolist(),
                      hard=rank_ids(ids, means, False)[:k].tolist(),
                      challenging=rank_ids(ids, vul, True)[:k].tolist())
