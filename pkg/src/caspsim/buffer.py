"""Fixed-capacity replay memory plus CASP's quota allocation and selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .analytics import SampleScore, rank_ids
from .stream import SampleSet


class SampleStrategy(enum.Enum):
    CHALLENGING = "Challenging"
    HARD = "Hard"
    SIMPLE = "Simple"
    RANDOM = "Random"

    @classmethod
    def parse(cls, text: str) -> "SampleStrategy":
        for s in cls:
            if s.value.lower() == text.strip().lower():
                return s
        raise ValueError(f"unknown sample strategy {text!r}")


class ReplayBuffer:
    """Reservoir-updated replay memory (Algorithm R)."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.dim = dim
        self._ids = np.zeros(capacity, dtype=np.int64)
        self._x = np.zeros((capacity, dim))
        self._y = np.zeros(capacity, dtype=np.int64)
        self._t = np.zeros(capacity, dtype=np.int64)
        self.size = 0
        self.stream_count = 0

    def __len__(self) -> int:
        return self.size

    @property
    def slots(self) -> SampleSet:
        n = self.size
        return SampleSet(self._ids[:n].copy(), self._x[:n].copy(),
                         self._y[:n].copy(), self._t[:n].copy())

    def _put(self, slot: int, batch: SampleSet, i: int) -> None:
        self._ids[slot] = batch.ids[i]
        self._x[slot] = batch.features[i]
        self._y[slot] = batch.labels[i]
        self._t[slot] = batch.tasks[i]

    def reservoir_update(self, batch: SampleSet, rng: np.random.Generator) -> "ReplayBuffer":
        """Offer every sample of ``batch`` to the reservoir, in order.

        While there is room a sample simply takes the next free slot.  After
        that the n-th sample seen draws j uniformly from [0, n) and replaces
        slot j when j < capacity.  The draws for one batch are made in a
        single vectorised call.
        """
        n = len(batch)
        fill = min(n, self.capacity - self.size)
        for i in range(fill):
            self._put(self.size, batch, i)
            self.size += 1
        self.stream_count += fill
        if fill == n:
            return self
        seen = self.stream_count + np.arange(1, n - fill + 1)
        js = rng.integers(0, seen)
        for i in np.flatnonzero(js < self.capacity):
            self._put(int(js[i]), batch, fill + int(i))
        self.stream_count += n - fill
        return self

    def random_retrieval(self, q: int, rng: np.random.Generator) -> SampleSet:
        """``q`` slots uniformly without replacement; empty when the buffer is."""
        if q < 1:
            raise ValueError("q must be >= 1")
        if self.size == 0:
            return SampleSet.empty(self.dim)
        idx = rng.choice(self.size, size=min(q, self.size), replace=False)
        return SampleSet(self._ids[idx], self._x[idx], self._y[idx], self._t[idx])

    def task_share(self, t: int) -> int:
        return int(np.count_nonzero(self._t[:self.size] == t))

    def class_counts(self, t: int | None = None) -> dict[int, int]:
        y = self._y[:self.size]
        if t is not None:
            y = y[self._t[:self.size] == t]
        vals, counts = np.unique(y, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def casp_rewrite(self, t: int, chosen: SampleSet) -> "ReplayBuffer":
        """Replace the slots of task ``t`` with ``chosen`` (same count)."""
        slots = np.flatnonzero(self._t[:self.size] == t)
        if len(chosen) != len(slots):
            raise ValueError(f"task {t} holds {len(slots)} slots, got {len(chosen)} samples")
        if len(chosen) and np.any(chosen.tasks != t):
            raise ValueError(f"chosen samples must all come from task {t}")
        for k, slot in enumerate(slots):
            self._put(slot, chosen, k)
        return self

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("slot,sample_id,task,class\n")
            for s in range(self.size):
                fh.write(f"{s},{self._ids[s]},{self._t[s]},{self._y[s]}\n")


@dataclass(frozen=True)
class AllocationPlan:
    task: int
    quotas: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.quotas.values())


def largest_remainder(weights: Sequence, total: int) -> list[int]:
    """Apportion ``total`` proportionally to ``weights``.

    Floors first, then one extra unit to the largest remainders; equal
    remainders favour the earlier position.  All-zero weights split evenly.
    """
    w = [Fraction(x) for x in weights]
    if any(x < 0 for x in w):
        raise ValueError("weights must be nonnegative")
    if not w:
        if total:
            raise ValueError("cannot apportion over zero classes")
        return []
    s = sum(w)
    if s == 0:
        w, s = [Fraction(1)] * len(w), Fraction(len(w))
    shares = [x * total / s for x in w]
    floors = [int(x) for x in shares]  # shares are >= 0, int() floors
    extra = total - sum(floors)
    order = sorted(range(len(w)), key=lambda i: (-(shares[i] - floors[i]), i))
    for i in order[:extra]:
        floors[i] += 1
    return floors


def allocate_quota(weights: Mapping[int, float], total: int,
                   class_counts: Mapping[int, int], task: int = 0) -> AllocationPlan:
    """Split ``total`` buffer slots across classes in proportion to ``weights``.

    Quotas larger than a class's population are clipped to it and the
    excess is re-apportioned among the remaining classes, repeatedly,
    until every quota fits.  Sum of quotas is exactly ``total``.
    """
    classes = sorted(weights)
    if total < 0:
        raise ValueError("total must be >= 0")
    avail = sum(int(class_counts.get(c, 0)) for c in classes)
    if total > avail:
        raise ValueError(f"cannot place {total} samples, only {avail} available")
    quotas = {c: 0 for c in classes}
    active, remaining = list(classes), total
    while active:
        shares = largest_remainder([weights[c] for c in active], remaining)
        over = [c for c, s in zip(active, shares) if s > class_counts.get(c, 0)]
        if not over:
            quotas.update(zip(active, shares))
            break
        for c in over:
            quotas[c] = int(class_counts.get(c, 0))
            remaining -= quotas[c]
        active = [c for c in active if c not in over]
    return AllocationPlan(task, quotas)


def select_samples(task_samples: SampleSet, scores: Sequence[SampleScore] | None,
                   plan: AllocationPlan, strategy: SampleStrategy,
                   rng: np.random.Generator) -> SampleSet:
    """Pick ``plan.quotas[c]`` samples of each class by ``strategy``.

    Ranked strategies order by vulnerability (challenging, descending) or
    mean confidence (simple descending, hard ascending); ties go to the
    smaller sample id.  ``scores`` may be None for the random strategy.
    """
    if strategy is not SampleStrategy.RANDOM:
        if scores is None:
            raise ValueError(f"{strategy.value} selection needs sample scores")
        by_id = {s.sample_id: s for s in scores}
        missing = set(task_samples.ids.tolist()) - set(by_id)
        if missing:
            raise ValueError(f"no score for samples {sorted(missing)[:5]}")
    picked = []
    for c in sorted(plan.quotas):
        k = plan.quotas[c]
        idx = np.flatnonzero(task_samples.labels == c)
        if k > len(idx):
            raise ValueError(f"quota {k} exceeds the {len(idx)} samples of class {c}")
        if k == 0:
            continue
        ids = task_samples.ids[idx]
        if strategy is SampleStrategy.RANDOM:
            chosen = idx[rng.choice(len(idx), size=k, replace=False)]
        else:
            if strategy is SampleStrategy.CHALLENGING:
                key, desc = [by_id[i].vulnerability for i in ids.tolist()], True
            elif strategy is SampleStrategy.SIMPLE:
                key, desc = [by_id[i].mean_confidence for i in ids.tolist()], True
            else:
                key, desc = [by_id[i].mean_confidence for i in ids.tolist()], False
            top = rank_ids(ids, np.array(key), desc)[:k]
            pos = {int(i): j for j, i in zip(idx, ids)}
            chosen = np.array([pos[int(i)] for i in top], dtype=np.int64)
        picked.append(chosen)
    if not picked:
        return task_samples[np.zeros(0, dtype=np.int64)]
    return task_samples[np.concatenate(picked)]
