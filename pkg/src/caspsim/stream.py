"""Class-incremental task streams.

Samples are stored column-wise in :class:`SampleSet` (ids, features, labels,
task indices) so that batching stays vectorised; iterating a set yields
:class:`Sample` rows.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np


class FormatError(ValueError):
    """A delimited file could not be parsed."""

    def __init__(self, message: str, row: int | None = None, path=None):
        self.row = row
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: int
    task: int


@dataclass(frozen=True, eq=False)
class SampleSet:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    tasks: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.features.ndim != 2 or len(self.features) != n \
                or len(self.labels) != n or len(self.tasks) != n:
            raise ValueError("SampleSet columns must have equal length")

    @classmethod
    def empty(cls, dim: int) -> "SampleSet":
        return cls(np.zeros(0, np.int64), np.zeros((0, dim)),
                   np.zeros(0, np.int64), np.zeros(0, np.int64))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], dim: int | None = None) -> "SampleSet":
        if not samples:
            if dim is None:
                raise ValueError("dimension needed for an empty sample list")
            return cls.empty(dim)
        return cls(np.array([s.id for s in samples], dtype=np.int64),
                   np.stack([np.asarray(s.features, dtype=np.float64) for s in samples]),
                   np.array([s.label for s in samples], dtype=np.int64),
                   np.array([s.task for s in samples], dtype=np.int64))

    @classmethod
    def concat(cls, parts: Sequence["SampleSet"]) -> "SampleSet":
        return cls(np.concatenate([p.ids for p in parts]),
                   np.concatenate([p.features for p in parts]),
                   np.concatenate([p.labels for p in parts]),
                   np.concatenate([p.tasks for p in parts]))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, idx) -> "SampleSet":
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return SampleSet(self.ids[idx], self.features[idx], self.labels[idx], self.tasks[idx])

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self.sample(i)

    def sample(self, i: int) -> Sample:
        return Sample(int(self.ids[i]), self.features[i], int(self.labels[i]), int(self.tasks[i]))

    def sorted_by_id(self) -> "SampleSet":
        return self[np.argsort(self.ids, kind="stable")]

    def with_task(self, t: int) -> "SampleSet":
        return replace(self, tasks=np.full(len(self), t, dtype=np.int64))

    def with_features(self, features: np.ndarray) -> "SampleSet":
        return replace(self, features=np.asarray(features, dtype=np.float64))

    def tobytes(self) -> bytes:
        return b"".join(a.tobytes() for a in (self.ids, self.features, self.labels, self.tasks))

    def equals(self, other: "SampleSet") -> bool:
        return (len(self) == len(other)
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.tasks, other.tasks))


@dataclass(frozen=True, eq=False)
class Task:
    index: int
    classes: tuple[int, ...]
    train: SampleSet
    test: SampleSet

    def __post_init__(self):
        allowed = set(self.classes)
        for part in (self.train, self.test):
            if not set(np.unique(part.labels).tolist()) <= allowed:
                raise ValueError(f"task {self.index} holds labels outside {self.classes}")

    def equals(self, other: "Task") -> bool:
        return (self.index == other.index and self.classes == other.classes
                and self.train.equals(other.train) and self.test.equals(other.test))


def streams_equal(a: Sequence[Task], b: Sequence[Task]) -> bool:
    return len(a) == len(b) and all(x.equals(y) for x, y in zip(a, b))


def check_disjoint(tasks: Sequence[Task]) -> None:
    seen: set[int] = set()
    for task in tasks:
        cls = set(task.classes)
        if cls & seen:
            raise ValueError(f"task {task.index} reuses classes {sorted(cls & seen)}")
        seen |= cls


@dataclass(frozen=True)
class StreamConfig:
    """Synthetic Gaussian class-incremental stream.

    ``spreads`` gives the cluster standard deviation per global class (a
    scalar applies to all).  Centers are drawn uniformly on a sphere of
    ``radius`` unless ``centers`` fixes them explicitly.
    """

    tasks: int = 5
    classes_per_task: int = 2
    train_per_class: int = 200
    test_per_class: int = 200
    feature_dim: int = 16
    spreads: float | tuple[float, ...] = 1.0
    radius: float = 3.0
    centers: tuple[tuple[float, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("tasks", "classes_per_task", "train_per_class",
                     "test_per_class", "feature_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        s = np.atleast_1d(np.asarray(self.spreads, dtype=np.float64))
        if s.size not in (1, self.n_classes):
            raise ValueError(f"spreads needs 1 or {self.n_classes} entries, got {s.size}")
        if not np.all(s > 0):
            raise ValueError("cluster spreads must be > 0")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if self.centers is not None:
            c = np.asarray(self.centers, dtype=np.float64)
            if c.shape != (self.n_classes, self.feature_dim):
                raise ValueError("centers must be (classes, feature_dim)")

    @property
    def n_classes(self) -> int:
        return self.tasks * self.classes_per_task

    def spread_vector(self) -> np.ndarray:
        s = np.atleast_1d(np.asarray(self.spreads, dtype=np.float64))
        return np.broadcast_to(s, (self.n_classes,)).copy()


def graded_spreads(n: int, low: float, high: float) -> tuple[float, ...]:
    """Linearly graded spreads from ``low`` (class 0) to ``high``."""
    return tuple(float(v) for v in np.linspace(low, high, n))


def sphere_centers(n: int, dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return radius * v / norms


def make_gaussian_stream(cfg: StreamConfig) -> list[Task]:
    """Draw every class from an isotropic Gaussian; pure in ``cfg``.

    Train ids come first (task order), test ids follow, so a stream written
    with :func:`write_delimited_dataset` reloads with identical ids.
    """
    rng = np.random.default_rng([cfg.seed, 0x57])
    if cfg.centers is not None:
        centers = np.asarray(cfg.centers, dtype=np.float64)
    else:
        centers = sphere_centers(cfg.n_classes, cfg.feature_dim, cfg.radius, rng)
    spreads = cfg.spread_vector()
    K, d = cfg.classes_per_task, cfg.feature_dim

    def draw(c: int, n: int) -> np.ndarray:
        return centers[c] + spreads[c] * rng.standard_normal((n, d))

    train_parts, test_parts = [], []
    for t in range(cfg.tasks):
        classes = range(t * K, (t + 1) * K)
        train_parts.append([draw(c, cfg.train_per_class) for c in classes])
        test_parts.append([draw(c, cfg.test_per_class) for c in classes])

    n_train = cfg.n_classes * cfg.train_per_class
    tasks, next_train, next_test = [], 0, n_train
    for t in range(cfg.tasks):
        classes = tuple(range(t * K, (t + 1) * K))
        sets = []
        for parts, per, start in ((train_parts[t], cfg.train_per_class, next_train),
                                  (test_parts[t], cfg.test_per_class, next_test)):
            n = per * K
            sets.append(SampleSet(np.arange(start, start + n, dtype=np.int64),
                                  np.concatenate(parts),
                                  np.repeat(np.array(classes, dtype=np.int64), per),
                                  np.full(n, t, dtype=np.int64)))
        next_train += K * cfg.train_per_class
        next_test += K * cfg.test_per_class
        tasks.append(Task(t, classes, sets[0], sets[1]))
    return tasks


def class_permutation(n_classes: int, seed: int | None) -> np.ndarray:
    """Seeded permutation of class slots; ``seed=None`` is the identity."""
    if seed is None:
        return np.arange(n_classes)
    return np.random.default_rng([seed, 0xC1A55]).permutation(n_classes)


def inverse_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


def apply_class_permutation(stream: Sequence[Task], perm: np.ndarray) -> list[Task]:
    """Reassign classes to task slots: slot ``k`` receives old slot ``perm[k]``.

    Slots are the classes listed task by task.  Task sizes (number of classes)
    are kept, ids and labels are preserved and only ``task`` fields change.
    """
    order = [c for task in stream for c in task.classes]
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(len(order))):
        raise ValueError("not a permutation of the stream's class slots")
    new_order = [order[p] for p in perm]
    trains = {c: task.train[task.train.labels == c] for task in stream for c in task.classes}
    tests = {c: task.test[task.test.labels == c] for task in stream for c in task.classes}
    out, pos = [], 0
    for t, task in enumerate(stream):
        classes = tuple(new_order[pos:pos + len(task.classes)])
        pos += len(task.classes)
        train = SampleSet.concat([trains[c] for c in classes]).with_task(t)
        test = SampleSet.concat([tests[c] for c in classes]).with_task(t)
        out.append(Task(t, classes, train, test))
    return out


def shuffle_class_order(stream: Sequence[Task], seed: int | None) -> list[Task]:
    n = sum(len(t.classes) for t in stream)
    return apply_class_permutation(stream, class_permutation(n, seed))


def corrupt_features(samples: SampleSet, sigma: float, seed: int) -> SampleSet:
    """Add i.i.d. Gaussian noise of scale ``sigma``; ids and labels kept."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return samples.with_features(samples.features.copy())
    rng = np.random.default_rng([seed, 0x00D])
    noise = sigma * rng.standard_normal(samples.features.shape)
    return samples.with_features(samples.features + noise)


# --------------------------------------------------------------------------
# delimited files

_HEADER = re.compile(r"#\s*dim\s*=\s*(\d+)\s+classes\s*=\s*(\d+)\s*$")


@dataclass(frozen=True)
class DatasetSchema:
    """How rows of a delimited file map onto tasks.

    Rows are ``x_1,...,x_d[,task],label``.  Without a task column, classes
    are grouped in ascending id order, ``classes_per_task`` at a time (all
    in one task when unset).
    """

    task_column: bool = False
    classes_per_task: int | None = None
    dim: int | None = None

    def __post_init__(self):
        if self.classes_per_task is not None and self.classes_per_task < 1:
            raise ValueError("classes_per_task must be >= 1")


def _read_rows(path, schema: DatasetSchema):
    path = os.fspath(path)
    rows, header = [], None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                m = _HEADER.match(text)
                if m and lineno == 1:
                    header = (int(m.group(1)), int(m.group(2)))
                continue
            rows.append((lineno, text))
    dim = schema.dim if schema.dim is not None else (header[0] if header else None)
    extra = 2 if schema.task_column else 1
    feats, labels, tasks = [], [], []
    for lineno, text in rows:
        cells = [c.strip() for c in text.split(",")]
        if dim is None:
            dim = len(cells) - extra
            if dim < 1:
                raise FormatError("no feature columns", lineno, path)
        if len(cells) != dim + extra:
            raise FormatError(f"expected {dim + extra} columns, found {len(cells)}",
                              lineno, path)
        try:
            x = [float(c) for c in cells[:dim]]
            label = int(cells[-1])
            task = int(cells[dim]) if schema.task_column else 0
        except ValueError as exc:
            raise FormatError(f"cannot parse value ({exc})", lineno, path) from None
        if not all(np.isfinite(x)):
            raise FormatError("non-finite feature", lineno, path)
        if label < 0 or task < 0:
            raise FormatError("labels and tasks must be nonnegative", lineno, path)
        feats.append(x)
        labels.append(label)
        tasks.append(task)
    if header is not None and labels and len(set(labels)) > header[1]:
        raise FormatError(f"header declares {header[1]} classes, found {len(set(labels))}",
                          None, path)
    return (np.array(feats, dtype=np.float64).reshape(len(feats), dim or 0),
            np.array(labels, dtype=np.int64), np.array(tasks, dtype=np.int64))


def _group_tasks(labels: np.ndarray, tasks: np.ndarray, schema: DatasetSchema) -> dict:
    """Map each row to a task index and each task to its class tuple."""
    if schema.task_column:
        groups = {}
        for t in np.unique(tasks):
            groups[int(t)] = tuple(sorted(set(labels[tasks == t].tolist())))
        return groups
    classes = sorted(set(labels.tolist()))
    k = schema.classes_per_task or max(len(classes), 1)
    return {i // k: tuple(classes[i:i + k]) for i in range(0, len(classes), k)}


def load_delimited_dataset(path, schema: DatasetSchema = DatasetSchema(),
                           test_path=None) -> list[Task]:
    """Load a stream from comma-separated rows; ids follow row order.

    Test rows (from ``test_path``) get ids after all training rows.
    """
    X, y, tk = _read_rows(path, schema)
    if len(y) == 0:
        raise FormatError("no data rows", None, os.fspath(path))
    groups = _group_tasks(y, tk, schema)
    class_task = {c: t for t, cls in groups.items() for c in cls}
    if schema.task_column:
        seen: dict[int, int] = {}
        for c, t in zip(y.tolist(), tk.tolist()):
            if seen.setdefault(c, t) != t:
                raise FormatError(f"class {c} appears in tasks {seen[c]} and {t}",
                                  None, os.fspath(path))
    row_task = np.array([class_task[c] for c in y.tolist()], dtype=np.int64)
    ids = np.arange(len(y), dtype=np.int64)
    train = SampleSet(ids, X, y, row_task)

    if test_path is not None:
        Xt, yt, _ = _read_rows(test_path, replace(schema, dim=X.shape[1]))
        unknown = set(yt.tolist()) - set(class_task)
        if unknown:
            raise FormatError(f"test classes {sorted(unknown)} absent from training data",
                              None, os.fspath(test_path))
        test = SampleSet(np.arange(len(y), len(y) + len(yt), dtype=np.int64), Xt, yt,
                         np.array([class_task[c] for c in yt.tolist()], dtype=np.int64))
    else:
        test = SampleSet.empty(X.shape[1])

    # task indices are renumbered densely in ascending order
    out = []
    for new_t, t in enumerate(sorted(groups)):
        classes = groups[t]
        out.append(Task(new_t, classes, train[train.tasks == t].with_task(new_t),
                        test[test.tasks == t].with_task(new_t)))
    return out


def write_delimited_dataset(stream: Sequence[Task], path, split: str = "train",
                            task_column: bool = False, header: bool = True) -> None:
    """Write one split of a stream in the loader's format (exact float repr)."""
    if split not in ("train", "test"):
        raise ValueError("split must be 'train' or 'test'")
    parts = [getattr(t, split) for t in stream]
    dim = parts[0].dim if parts else 0
    n_classes = len({c for t in stream for c in t.classes})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            fh.write(f"# dim={dim} classes={n_classes}\n")
        for part in parts:
            for i in range(len(part)):
                row = [repr(float(v)) for v in part.features[i]]
                if task_column:
                    row.append(str(int(part.tasks[i])))
                row.append(str(int(part.labels[i])))
                w.writerow(row)
