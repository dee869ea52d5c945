"""Accuracy-matrix bookkeeping and end-of-stream metrics."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np


class AccuracyMatrix:
    """Lower-triangular ``acc[i, j]``: accuracy on task j after training task i.

    Indices are 0-based; cells with j > i are never defined.
    """

    def __init__(self, tasks: int):
        if tasks < 1:
            raise ValueError("need at least one task")
        self.tasks = tasks
        self._a = np.full((tasks, tasks), np.nan)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "AccuracyMatrix":
        m = cls(len(rows))
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                m.set(i, j, v)
        return m

    def set(self, i: int, j: int, value: float) -> None:
        if not (0 <= j <= i < self.tasks):
            raise ValueError(f"cell ({i}, {j}) is outside the lower triangle")
        if not 0.0 <= value <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        self._a[i, j] = value

    def get(self, i: int, j: int) -> float:
        if not (0 <= j <= i < self.tasks) or math.isnan(self._a[i, j]):
            raise ValueError(f"cell ({i}, {j}) is undefined")
        return float(self._a[i, j])

    def row_complete(self, i: int) -> bool:
        return not np.isnan(self._a[i, :i + 1]).any()

    @property
    def values(self) -> np.ndarray:
        return self._a.copy()

    def tobytes(self) -> bytes:
        return self._a.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, AccuracyMatrix) and np.array_equal(
            self._a, other._a, equal_nan=True)


def average_end_accuracy(m: AccuracyMatrix) -> float:
    T = m.tasks
    if not m.row_complete(T - 1):
        raise ValueError("final row of the accuracy matrix is incomplete")
    return float(np.mean([m.get(T - 1, j) for j in range(T)]))


def average_end_forgetting(m: AccuracyMatrix) -> float:
    """Mean over earlier tasks of (best accuracy before the end - final accuracy).

    The best is taken over rows j..T-2 of column j, i.e. only after the task
    has been learned.  Negative values mean backward transfer.
    """
    T = m.tasks
    if T < 2:
        raise ValueError("forgetting needs at least two tasks")
    for i in range(T):
        if not m.row_complete(i):
            raise ValueError(f"row {i} of the accuracy matrix is incomplete")
    drops = [max(m.get(i, j) for i in range(j, T - 1)) - m.get(T - 1, j)
             for j in range(T - 1)]
    return float(np.mean(drops))


def per_class_forgetting(history: Mapping[int, Sequence[float]]) -> dict[int, float]:
    """Max over the recorded history minus the final value, per class."""
    if not history:
        raise ValueError("empty accuracy history")
    out = {}
    for c, h in history.items():
        if len(h) == 0:
            raise ValueError(f"class {c} has no recorded accuracy")
        out[c] = float(max(h) - h[-1])
    return out


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length sequences of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
