"""CASP: surrogate confidence tracing, class quotas and sample selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytics import ClassScore, ConfidenceTrace
from .buffer import (AllocationPlan, ReplayBuffer, SampleStrategy, allocate_quota,
                     select_samples)
from .model import Sgd, SgdConfig, init_params, train_epoch
from .stream import Task


class ClassStrategy(enum.Enum):
    CHALLENGING = "Challenging"
    HARD = "Hard"
    SIMPLE = "Simple"
    BALANCED = "Balanced"
    NO_POLICY = "NoPolicy"

    @classmethod
    def parse(cls, text: str) -> "ClassStrategy":
        key = text.strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown class strategy {text!r}")


@dataclass(frozen=True)
class CaspConfig:
    surrogate: SgdConfig = field(default_factory=lambda: SgdConfig(
        learning_rate=0.1, momentum=0.9, weight_decay=5e-4, epochs=8))
    hidden: int = 32
    batch_size: int = 50
    class_strategy: ClassStrategy = ClassStrategy.CHALLENGING
    sample_strategy: SampleStrategy = SampleStrategy.CHALLENGING
    include_epoch0: bool = False
    seed: int = 0

    @property
    def is_identity(self) -> bool:
        """NoPolicy with random selection leaves the reservoir contents alone."""
        return (self.class_strategy is ClassStrategy.NO_POLICY
                and self.sample_strategy is SampleStrategy.RANDOM)


def class_weights(scores: Sequence[ClassScore], strategy: ClassStrategy) -> dict[int, float]:
    if not scores:
        raise ValueError("no class scores")
    if strategy is ClassStrategy.CHALLENGING:
        return {s.class_id: s.vulnerability for s in scores}
    if strategy is ClassStrategy.HARD:
        return {s.class_id: 1.0 - s.mean_confidence for s in scores}
    if strategy is ClassStrategy.SIMPLE:
        return {s.class_id: s.mean_confidence for s in scores}
    if strategy is ClassStrategy.BALANCED:
        return {s.class_id: 1.0 for s in scores}
    raise ValueError("NoPolicy keeps the reservoir's class mix; no weights apply")


def build_trace(task: Task, cfg: CaspConfig) -> ConfidenceTrace:
    """Train a fresh surrogate on the task's training set and trace it.

    The surrogate's output layer covers only the task's classes (at least
    two units), indexed in the order of ``task.classes``.
    """
    data = task.train
    if len(data) == 0:
        raise ValueError(f"task {task.index} has no training data")
    local = {c: i for i, c in enumerate(task.classes)}
    y_local = np.array([local[c] for c in data.labels.tolist()], dtype=np.int64)
    local_data = type(data)(data.ids, data.features, y_local, data.tasks)

    rng = np.random.default_rng([cfg.seed, task.index, 0x5A6])
    params = init_params(data.dim, cfg.hidden, max(len(task.classes), 2), rng)
    epochs = cfg.surrogate.epochs
    trace = ConfidenceTrace(data.ids, data.labels, epochs + int(cfg.include_epoch0))
    if cfg.include_epoch0:
        trace.record_epoch(params, data, y_local)
    opt = Sgd(cfg.surrogate)
    for _ in range(epochs):
        params = train_epoch(params, local_data, cfg.surrogate, cfg.batch_size, rng, opt)
        trace.record_epoch(params, data, y_local)
    return trace


def run_casp(task: Task, buffer: ReplayBuffer, cfg: CaspConfig,
             trace: ConfidenceTrace | None = None) -> tuple[AllocationPlan, ReplayBuffer]:
    """Rewrite task ``task.index``'s share of the buffer.

    The share size is whatever reservoir sampling left for the task; CASP
    only decides which classes and samples fill it.  A precomputed
    ``trace`` may be passed to skip surrogate training.
    """
    t = task.index
    share = buffer.task_share(t)
    current = buffer.class_counts(t)
    if cfg.is_identity:
        return AllocationPlan(t, {c: current.get(c, 0) for c in task.classes}), buffer
    counts = {c: int(np.count_nonzero(task.train.labels == c)) for c in task.classes}
    if share == 0:
        return AllocationPlan(t, {c: 0 for c in task.classes}), buffer

    if trace is None:
        trace = build_trace(task, cfg)
    if cfg.class_strategy is ClassStrategy.NO_POLICY:
        plan = AllocationPlan(t, {c: current.get(c, 0) for c in task.classes})
    else:
        weights = class_weights(trace.class_scores(), cfg.class_strategy)
        plan = allocate_quota(weights, share, counts, task=t)
    rng = np.random.default_rng([cfg.seed, t, 0x5E1])
    chosen = select_samples(task.train, trace.sample_scores(), plan,
                            cfg.sample_strategy, rng)
    buffer.casp_rewrite(t, chosen)
    return plan, buffer
