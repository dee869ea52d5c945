"""Flat ``key = value`` experiment files.

One setting per line, ``#`` starts a comment, unknown keys are rejected.
Recognised keys, grouped by what they configure:

stream (synthetic)
    tasks, classes_per_task, train_per_class, test_per_class, feature_dim,
    radius, stream_seed, spreads (one value or a comma list with one entry
    per class), spread_low + spread_high (linearly graded spreads; add
    ``graded_per_task = true`` to repeat the grading inside every task)
stream (from disk)
    dataset, dataset_test, task_column, dataset_classes_per_task
continual learner
    buffer, batch_size, replay_size, epochs, hidden, learning_rate,
    momentum, weight_decay, cosine
surrogate and policy
    surrogate_epochs, surrogate_learning_rate, surrogate_momentum,
    surrogate_weight_decay, surrogate_hidden, surrogate_batch_size,
    class_strategy, sample_strategy, include_epoch0
run
    method, seeds, shuffle_classes, ood_sigma, retain_fraction,
    subset_category, timing, grid_class_strategies, grid_sample_strategies
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .buffer import SampleStrategy
from .policy import ClassStrategy
from .runner import ExperimentConfig
from .stream import DatasetSchema, graded_spreads

_SECTION = "experiment"

_STREAM_INT = ("tasks", "classes_per_task", "train_per_class", "test_per_class", "feature_dim")
_KEYS = frozenset(_STREAM_INT + (
    "radius", "stream_seed", "spreads", "spread_low", "spread_high", "graded_per_task",
    "dataset", "dataset_test", "task_column", "dataset_classes_per_task",
    "buffer", "batch_size", "replay_size", "epochs", "hidden", "learning_rate",
    "momentum", "weight_decay", "cosine",
    "surrogate_epochs", "surrogate_learning_rate", "surrogate_momentum",
    "surrogate_weight_decay", "surrogate_hidden", "surrogate_batch_size",
    "class_strategy", "sample_strategy", "include_epoch0",
    "method", "seeds", "shuffle_classes", "ood_sigma", "retain_fraction",
    "subset_category", "timing", "grid_class_strategies", "grid_sample_strategies",
))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    class_strategies: tuple[ClassStrategy, ...] = tuple(ClassStrategy)
    sample_strategies: tuple[SampleStrategy, ...] = tuple(SampleStrategy)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"3"``, ``"0..4"`` (inclusive) or ``"1,5,9"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            if hi < lo:
                raise ConfigError(f"empty seed range {text!r}")
            return tuple(range(lo, hi + 1))
        seeds = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def _bool(key: str, v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {v!r}")


def _num(key: str, v: str, kind=float):
    try:
        return kind(v)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {v!r}") from exc


def _floats(key: str, v: str) -> tuple[float, ...]:
    return tuple(_num(key, p) for p in v.split(",") if p.strip())


def read_pairs(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace(f"[{_SECTION}]", "").strip()) from exc
    pairs = dict(parser[_SECTION])
    unknown = sorted(set(pairs) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    return pairs


def parse_config(text: str, base: ExperimentConfig | None = None) -> tuple[ExperimentConfig, GridSpec]:
    kv = read_pairs(text)
    cfg = base or ExperimentConfig()
    try:
        return _apply(cfg, kv), _grid(kv)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: ExperimentConfig | None = None) -> tuple[ExperimentConfig, GridSpec]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, base)


def _grid(kv: dict[str, str]) -> GridSpec:
    spec = GridSpec()
    if "grid_class_strategies" in kv:
        spec = replace(spec, class_strategies=tuple(
            ClassStrategy.parse(s) for s in kv["grid_class_strategies"].split(",") if s.strip()))
    if "grid_sample_strategies" in kv:
        spec = replace(spec, sample_strategies=tuple(
            SampleStrategy.parse(s) for s in kv["grid_sample_strategies"].split(",") if s.strip()))
    if not spec.class_strategies or not spec.sample_strategies:
        raise ConfigError("the strategy grid is empty")
    return spec


def _apply(cfg: ExperimentConfig, kv: dict[str, str]) -> ExperimentConfig:
    stream = cfg.stream
    s_updates = {k: _num(k, kv[k], int) for k in _STREAM_INT if k in kv}
    if "radius" in kv:
        s_updates["radius"] = _num("radius", kv["radius"])
    if "stream_seed" in kv:
        s_updates["seed"] = _num("stream_seed", kv["stream_seed"], int)
    tasks = s_updates.get("tasks", stream.tasks)
    per_task = s_updates.get("classes_per_task", stream.classes_per_task)
    if "spreads" in kv and ("spread_low" in kv or "spread_high" in kv):
        raise ConfigError("give either spreads or spread_low/spread_high, not both")
    if "spreads" in kv:
        sp = _floats("spreads", kv["spreads"])
        s_updates["spreads"] = sp[0] if len(sp) == 1 else sp
    elif "spread_low" in kv or "spread_high" in kv:
        if not ("spread_low" in kv and "spread_high" in kv):
            raise ConfigError("spread_low and spread_high go together")
        lo, hi = _num("spread_low", kv["spread_low"]), _num("spread_high", kv["spread_high"])
        if _bool("graded_per_task", kv.get("graded_per_task", "false")):
            s_updates["spreads"] = graded_spreads(per_task, lo, hi) * tasks
        else:
            s_updates["spreads"] = graded_spreads(tasks * per_task, lo, hi)
    elif "graded_per_task" in kv:
        raise ConfigError("graded_per_task needs spread_low and spread_high")
    elif s_updates and isinstance(stream.spreads, tuple) \
            and len(stream.spreads) != tasks * per_task:
        # the default graded profile no longer fits the new class count
        s_updates["spreads"] = graded_spreads(tasks * per_task, min(stream.spreads),
                                              max(stream.spreads))
    if s_updates:
        stream = replace(stream, **s_updates)

    schema = cfg.dataset_schema
    if "task_column" in kv:
        schema = replace(schema, task_column=_bool("task_column", kv["task_column"]))
    if "dataset_classes_per_task" in kv:
        schema = replace(schema, classes_per_task=_num(
            "dataset_classes_per_task", kv["dataset_classes_per_task"], int))

    sgd = cfg.sgd
    sgd_updates = {}
    for key, field in (("learning_rate", "learning_rate"), ("momentum", "momentum"),
                       ("weight_decay", "weight_decay")):
        if key in kv:
            sgd_updates[field] = _num(key, kv[key])
    epochs = _num("epochs", kv["epochs"], int) if "epochs" in kv else cfg.epochs
    if "cosine" in kv:
        sgd_updates["cosine_t_max"] = epochs * tasks if _bool("cosine", kv["cosine"]) else None
    if sgd_updates:
        sgd = replace(sgd, **sgd_updates)

    casp = cfg.casp
    sur = casp.surrogate
    sur_updates = {}
    for key, field in (("surrogate_learning_rate", "learning_rate"),
                       ("surrogate_momentum", "momentum"),
                       ("surrogate_weight_decay", "weight_decay")):
        if key in kv:
            sur_updates[field] = _num(key, kv[key])
    if "surrogate_epochs" in kv:
        sur_updates["epochs"] = _num("surrogate_epochs", kv["surrogate_epochs"], int)
    if sur_updates:
        sur = replace(sur, **sur_updates)
    c_updates = {"surrogate": sur}
    if "surrogate_hidden" in kv:
        c_updates["hidden"] = _num("surrogate_hidden", kv["surrogate_hidden"], int)
    if "surrogate_batch_size" in kv:
        c_updates["batch_size"] = _num("surrogate_batch_size", kv["surrogate_batch_size"], int)
    if "class_strategy" in kv:
        c_updates["class_strategy"] = ClassStrategy.parse(kv["class_strategy"])
    if "sample_strategy" in kv:
        c_updates["sample_strategy"] = SampleStrategy.parse(kv["sample_strategy"])
    if "include_epoch0" in kv:
        c_updates["include_epoch0"] = _bool("include_epoch0", kv["include_epoch0"])
    casp = replace(casp, **c_updates)

    top = {"stream": stream, "dataset_schema": schema, "sgd": sgd, "casp": casp,
           "epochs": epochs}
    for key in ("buffer", "batch_size", "replay_size", "hidden"):
        if key in kv:
            top[key] = _num(key, kv[key], int)
    for key in ("dataset", "dataset_test", "method", "subset_category"):
        if key in kv:
            top[key] = kv[key].strip()
    if "seeds" in kv:
        top["seeds"] = parse_seeds(kv["seeds"])
    if "shuffle_classes" in kv:
        top["shuffle_classes"] = _bool("shuffle_classes", kv["shuffle_classes"])
    if "timing" in kv:
        top["timing"] = _bool("timing", kv["timing"])
    if "ood_sigma" in kv:
        v = kv["ood_sigma"].strip().lower()
        top["ood_sigma"] = None if v in ("", "none") else _num("ood_sigma", v)
    if "retain_fraction" in kv:
        top["retain_fraction"] = _num("retain_fraction", kv["retain_fraction"])
    return replace(cfg, **top)
