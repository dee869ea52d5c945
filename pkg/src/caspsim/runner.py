"""Experience Replay with and without CASP, the offline subset study, the
strategy grid and result files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analytics import ConfidenceTrace
from .buffer import AllocationPlan, ReplayBuffer, SampleStrategy, select_samples
from .metrics import (AccuracyMatrix, average_end_accuracy, average_end_forgetting,
                      pearson, per_class_forgetting)
from .model import (ModelParams, Sgd, SgdConfig, evaluate_accuracy, init_params,
                    loss_and_grad, per_class_accuracy, train_epoch)
from .policy import CaspConfig, ClassStrategy, build_trace, run_casp
from .stream import (DatasetSchema, SampleSet, StreamConfig, Task, corrupt_features,
                     graded_spreads, load_delimited_dataset, make_gaussian_stream,
                     shuffle_class_order)

METHODS = ("ER", "ER+CASP", "offline-subset")
SUBSET_CATEGORIES = ("challenging", "hard", "simple", "random")

# one named sub-generator per concern, all derived from the run seed
_STREAM, _ORDER, _INIT, _BATCH, _RESERVOIR, _RETRIEVAL, _CASP, _OOD = range(8)


def default_stream() -> StreamConfig:
    """Desk-scale profile: 5 tasks x 2 classes, graded cluster spreads."""
    return StreamConfig(tasks=5, classes_per_task=2, train_per_class=200,
                        test_per_class=200, feature_dim=16,
                        spreads=graded_spreads(10, 0.3, 3.0), radius=4.0)


def graded_task_stream(tasks: int = 5, classes_per_task: int = 10, per_class: int = 100,
                       low: float = 0.3, high: float = 3.0) -> StreamConfig:
    """Every task grades its classes from tight (``low``) to wide (``high``)."""
    return StreamConfig(tasks=tasks, classes_per_task=classes_per_task,
                        train_per_class=per_class, test_per_class=per_class, feature_dim=16,
                        spreads=graded_spreads(classes_per_task, low, high) * tasks,
                        radius=4.0)


@dataclass(frozen=True)
class ExperimentConfig:
    stream: StreamConfig = field(default_factory=default_stream)
    dataset: str | None = None
    dataset_test: str | None = None
    dataset_schema: DatasetSchema = field(default_factory=DatasetSchema)
    buffer: int = 100
    batch_size: int = 10
    replay_size: int = 10
    epochs: int = 5
    hidden: int = 32
    sgd: SgdConfig = field(default_factory=lambda: SgdConfig(learning_rate=0.1))
    casp: CaspConfig = field(default_factory=CaspConfig)
    method: str = "ER+CASP"
    seeds: tuple[int, ...] = (0,)
    shuffle_classes: bool = True
    ood_sigma: float | None = None
    retain_fraction: float = 0.1
    subset_category: str = "challenging"
    timing: bool = False

    def __post_init__(self):
        if self.buffer < 1:
            raise ValueError("buffer capacity must be >= 1")
        if self.batch_size < 1 or self.replay_size < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.ood_sigma is not None and self.ood_sigma < 0:
            raise ValueError("ood_sigma must be >= 0")
        if not 0.0 < self.retain_fraction <= 1.0:
            raise ValueError("retain_fraction must lie in (0, 1]")
        if self.subset_category not in SUBSET_CATEGORIES:
            raise ValueError(f"subset_category must be one of {SUBSET_CATEGORIES}")


def correlation_profile() -> ExperimentConfig:
    """Ten graded classes per task in a fixed order, used to relate class
    vulnerability on the first task to how much each class is later forgotten."""
    return ExperimentConfig(stream=graded_task_stream(), shuffle_classes=False)


@dataclass(frozen=True)
class ResultRow:
    method: str
    seed: int
    buffer: int
    tasks: int
    avg_end_acc: float
    avg_end_forget: float | None = None
    ood_acc: float | None = None
    wall_ms: float | None = None

    def rounded(self) -> "ResultRow":
        r = lambda v: None if v is None else round(float(v), 6)
        return replace(self, avg_end_acc=r(self.avg_end_acc),
                       avg_end_forget=r(self.avg_end_forget),
                       ood_acc=r(self.ood_acc), wall_ms=r(self.wall_ms))

    def metrics(self) -> tuple:
        """Everything but the method tag and timing."""
        return (self.seed, self.buffer, self.tasks, self.avg_end_acc,
                self.avg_end_forget, self.ood_acc)


@dataclass
class RunRecord:
    matrix: AccuracyMatrix
    row: ResultRow
    tasks: list[Task]
    # accuracy of each class after every task from the one that introduced it
    class_history: dict[int, list[float]]
    plans: list[AllocationPlan]
    traces: dict[int, ConfidenceTrace]
    params: ModelParams
    buffer: ReplayBuffer


def _rng(seed: int, concern: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([seed, concern, *extra])


def _derived_seed(seed: int, concern: int) -> int:
    return int(np.random.SeedSequence([seed, concern]).generate_state(1)[0])


def prepare_stream(config: ExperimentConfig, seed: int) -> list[Task]:
    """Load or generate the task sequence for one run seed."""
    if config.dataset is not None:
        tasks = load_delimited_dataset(config.dataset, config.dataset_schema,
                                       config.dataset_test)
    else:
        tasks = make_gaussian_stream(
            replace(config.stream, seed=_derived_seed(config.stream.seed + seed, _STREAM)))
    if config.shuffle_classes:
        tasks = shuffle_class_order(tasks, _derived_seed(seed, _ORDER))
    return tasks


def _method_tag(config: ExperimentConfig, casp: bool) -> str:
    if not casp:
        return "ER"
    c = config.casp
    if (c.class_strategy is ClassStrategy.CHALLENGING
            and c.sample_strategy is SampleStrategy.CHALLENGING):
        return "ER+CASP"
    return f"ER+CASP[{c.class_strategy.value}/{c.sample_strategy.value}]"


def _casp_config(config: ExperimentConfig, seed: int) -> CaspConfig:
    return replace(config.casp, seed=_derived_seed(seed, _CASP))


def run_experiment(config: ExperimentConfig, seed: int, casp: bool,
                   dump_dir: str | os.PathLike | None = None,
                   dump_traces: bool = False, dump_buffer: bool = False) -> RunRecord:
    """One ER run, optionally rewriting each task's buffer share with CASP.

    Every training datum is offered to the reservoir once, during the first
    pass over its task; later epochs only retrieve from the buffer.
    """
    started = time.perf_counter()
    tasks = prepare_stream(config, seed)
    if not tasks or any(len(t.train) == 0 for t in tasks):
        raise ValueError("every task needs training data")
    if any(len(t.test) == 0 for t in tasks):
        raise ValueError("every task needs test data")
    dim = tasks[0].train.dim
    n_classes = max(max(t.classes) for t in tasks) + 1
    if n_classes < 2:
        raise ValueError("the stream needs at least two classes")
    casp_cfg = _casp_config(config, seed)
    params = init_params(dim, config.hidden, n_classes, _rng(seed, _INIT))
    opt = Sgd(config.sgd)
    buf = ReplayBuffer(config.buffer, dim)
    batch_rng, res_rng, ret_rng = _rng(seed, _BATCH), _rng(seed, _RESERVOIR), _rng(seed, _RETRIEVAL)
    T = len(tasks)
    matrix = AccuracyMatrix(T)
    history: dict[int, list[float]] = {}
    plans, traces = [], {}
    if dump_dir is not None:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
    tag = _method_tag(config, casp)
    stem = f"{tag.replace('/', '-').replace('+', 'p')}_seed{seed}"

    for t, task in enumerate(tasks):
        data = task.train
        X, y = data.features, data.labels
        for epoch in range(config.epochs):
            order = batch_rng.permutation(len(data))
            for start in range(0, len(order), config.batch_size):
                idx = order[start:start + config.batch_size]
                replay = buf.random_retrieval(config.replay_size, ret_rng)
                if len(replay):
                    bx = np.concatenate([X[idx], replay.features])
                    by = np.concatenate([y[idx], replay.labels])
                else:
                    bx, by = X[idx], y[idx]
                _, grads = loss_and_grad(params, bx, by)
                params = opt.step(params, grads)
                if epoch == 0:
                    buf.reservoir_update(data[idx], res_rng)
            opt.epoch += 1

        if casp:
            trace = None
            if not casp_cfg.is_identity and buf.task_share(t) > 0:
                trace = build_trace(task, casp_cfg)
                traces[t] = trace
            plan, buf = run_casp(task, buf, casp_cfg, trace=trace)
            plans.append(plan)
            if dump_traces and trace is not None and dump_dir is not None:
                trace.dump(Path(dump_dir) / f"{stem}_trace_task{t}.csv")
        if dump_buffer and dump_dir is not None:
            buf.dump(Path(dump_dir) / f"{stem}_buffer_task{t}.csv")

        for j in range(t + 1):
            matrix.set(t, j, evaluate_accuracy(params, tasks[j].test))
        seen = SampleSet.concat([tasks[j].test for j in range(t + 1)])
        for c, acc in per_class_accuracy(params, seen).items():
            history.setdefault(c, []).append(acc)

    ood = None
    if config.ood_sigma is not None:
        ood = float(np.mean([
            evaluate_accuracy(params, corrupt_features(task.test, config.ood_sigma,
                                                       _derived_seed(seed, _OOD) + k))
            for k, task in enumerate(tasks)]))
    row = ResultRow(
        method=tag, seed=seed, buffer=config.buffer, tasks=T,
        avg_end_acc=average_end_accuracy(matrix),
        avg_end_forget=average_end_forgetting(matrix) if T >= 2 else None,
        ood_acc=ood,
        wall_ms=(time.perf_counter() - started) * 1e3 if config.timing else None)
    return RunRecord(matrix, row, tasks, history, plans, traces, params, buf)


def run_er(config: ExperimentConfig, seed: int, **dumps) -> tuple[AccuracyMatrix, ResultRow]:
    rec = run_experiment(config, seed, casp=False, **dumps)
    return rec.matrix, rec.row


def run_er_casp(config: ExperimentConfig, seed: int, **dumps) -> tuple[AccuracyMatrix, ResultRow]:
    rec = run_experiment(config, seed, casp=True, **dumps)
    return rec.matrix, rec.row


def run_config(config: ExperimentConfig, seeds: Iterable[int] | None = None, **dumps) -> list[ResultRow]:
    """Rows for ``config.method`` over the seeds, sorted by (method, seed)."""
    seeds = config.seeds if seeds is None else tuple(seeds)
    rows = []
    for s in seeds:
        if config.method == "ER":
            rows.append(run_er(config, s, **dumps)[1])
        elif config.method == "ER+CASP":
            rows.append(run_er_casp(config, s, **dumps)[1])
        else:
            rows.append(run_subset_study(config, config.retain_fraction,
                                         config.subset_category, s))
    return sort_rows(rows)


def run_grid(config: ExperimentConfig,
             class_strategies: Sequence[ClassStrategy],
             sample_strategies: Sequence[SampleStrategy],
             seeds: Iterable[int] | None = None, **dumps) -> list[ResultRow]:
    """ER+CASP for every (class strategy, sample strategy, seed) cell."""
    if not class_strategies or not sample_strategies:
        raise ValueError("the strategy grid is empty")
    seeds = config.seeds if seeds is None else tuple(seeds)
    rows = []
    for cs in class_strategies:
        for ss in sample_strategies:
            cell = replace(config, casp=replace(config.casp, class_strategy=cs,
                                                sample_strategy=ss))
            for s in seeds:
                rows.append(run_er_casp(cell, s, **dumps)[1])
    return sort_rows(rows)


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.method, r.seed))


# --------------------------------------------------------------------------
# offline subset study

def _offline_pool(tasks: Sequence[Task]) -> Task:
    classes = tuple(sorted(c for t in tasks for c in t.classes))
    return Task(0, classes,
                SampleSet.concat([t.train for t in tasks]).with_task(0).sorted_by_id(),
                SampleSet.concat([t.test for t in tasks]).with_task(0).sorted_by_id())


def train_offline(config: ExperimentConfig, seed: int, data: SampleSet,
                  n_classes: int) -> ModelParams:
    rng = _rng(seed, _INIT)
    params = init_params(data.dim, config.hidden, n_classes, rng)
    opt = Sgd(config.sgd)
    batch_rng = _rng(seed, _BATCH)
    for _ in range(config.epochs):
        params = train_epoch(params, data, config.sgd, config.batch_size, batch_rng, opt)
    return params


def subset_for(pool: Task, trace: ConfidenceTrace | None, fraction: float,
               category: str, seed: int) -> SampleSet:
    """Keep floor(fraction * n_c) samples of every class by ``category``."""
    if category not in SUBSET_CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    counts = {c: int(np.count_nonzero(pool.train.labels == c)) for c in pool.classes}
    quotas = {c: int(math.floor(fraction * n + 1e-9)) for c, n in counts.items()}
    if any(q < 1 for q in quotas.values()):
        raise ValueError(f"fraction {fraction} leaves some class without samples")
    strategy = SampleStrategy.parse(category)
    scores = trace.sample_scores() if trace is not None else None
    chosen = select_samples(pool.train, scores, AllocationPlan(0, quotas), strategy,
                            _rng(seed, _CASP, 0x5B))
    return chosen.sorted_by_id()


def run_subset_study(config: ExperimentConfig, retain_fraction: float, category: str,
                     seed: int) -> ResultRow:
    """Train a fresh model on a scored fraction of the pooled training data.

    The whole stream is pooled offline, scored with a surrogate trace, cut
    per class to ``retain_fraction`` by ``category`` and used to train a new
    model whose test accuracy is reported.
    """
    started = time.perf_counter()
    if not 0.0 < retain_fraction <= 1.0:
        raise ValueError("retain_fraction must lie in (0, 1]")
    pool = _offline_pool(prepare_stream(config, seed))
    n_classes = max(pool.classes) + 1
    if retain_fraction == 1.0:
        subset = pool.train
    else:
        trace = None
        if category != "random":
            trace = build_trace(pool, _casp_config(config, seed))
        subset = subset_for(pool, trace, retain_fraction, category, seed)
    params = train_offline(config, seed, subset, n_classes)
    return ResultRow(
        method=f"offline-subset[{category}@{retain_fraction:g}]", seed=seed,
        buffer=len(subset), tasks=1,
        avg_end_acc=evaluate_accuracy(params, pool.test),
        wall_ms=(time.perf_counter() - started) * 1e3 if config.timing else None)


# --------------------------------------------------------------------------
# vulnerability vs forgetting

def vulnerability_forgetting(config: ExperimentConfig, seed: int) -> tuple[float, dict, dict]:
    """Correlate first-task class vulnerability with later class forgetting.

    Runs plain ER over the stream, scores the first task's classes with a
    fresh surrogate and returns (pearson r, vulnerability, forgetting).
    """
    rec = run_experiment(config, seed, casp=False)
    first = rec.tasks[0]
    trace = build_trace(first, _casp_config(config, seed))
    vul = {s.class_id: s.vulnerability for s in trace.class_scores()}
    forget = per_class_forgetting({c: rec.class_history[c] for c in first.classes})
    cls = sorted(vul)
    return pearson([vul[c] for c in cls], [forget[c] for c in cls]), vul, forget


# --------------------------------------------------------------------------
# result files

CSV_HEADER = ("method", "seed", "buffer", "tasks", "avg_end_acc", "avg_end_forget",
              "ood_acc", "wall_ms")


def _fmt(v) -> str:
    return "" if v is None else f"{float(v):.6f}"


def format_results(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    rows = [r.rounded() for r in rows]
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.method, r.seed, r.buffer, r.tasks, _fmt(r.avg_end_acc),
                        _fmt(r.avg_end_forget), _fmt(r.ood_acc), _fmt(r.wall_ms)])
        return out.getvalue()
    if fmt == "json":
        payload = [{k: getattr(r, k) for k in CSV_HEADER} for r in rows]
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows: Sequence[ResultRow], path, fmt: str = "csv") -> None:
    text = format_results(rows, fmt)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {os.fspath(path)}: {exc.strerror}") from exc


def read_results(path, fmt: str = "csv") -> list[ResultRow]:
    with open(path, newline="") as fh:
        text = fh.read()
    if fmt == "json":
        return [ResultRow(**d) for d in json.loads(text)]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    opt = lambda s: None if s == "" else float(s)
    return [ResultRow(m, int(s), int(b), int(t), float(a), opt(f), opt(o), opt(w))
            for m, s, b, t, a, f, o, w in reader]
