"""Command line entry point: ``caspsim run|grid|subset``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, GridSpec, load_config, parse_seeds
from .runner import (SUBSET_CATEGORIES, ExperimentConfig, emit_results, format_results,
                     run_config, run_grid, run_subset_study, sort_rows)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value experiment file")
    common.add_argument("--seeds", help="seed, inclusive range a..b, or comma list")
    common.add_argument("--out", help="result file (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--ood-sigma", type=float, default=None,
                        help="also report accuracy on test inputs with this much added noise")
    common.add_argument("--dump-traces", action="store_true",
                        help="write each task's surrogate confidence trace")
    common.add_argument("--dump-buffer", action="store_true",
                        help="write the buffer contents after every task")
    common.add_argument("--dump-dir", default=None,
                        help="where dumps go (default: <out>.dumps or ./dumps)")
    common.add_argument("--timing", action="store_true",
                        help="fill the wall_ms column (output is then not reproducible)")

    p = argparse.ArgumentParser(prog="caspsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="one configuration over the seeds")
    run.add_argument("--method", choices=("ER", "ER+CASP", "offline-subset"), default=None)
    sub.add_parser("grid", parents=[common],
                   help="ER+CASP over every class x sample strategy pair")
    subset = sub.add_parser("subset", parents=[common],
                            help="offline training on a scored fraction of the data")
    subset.add_argument("--fraction", type=float, default=None)
    subset.add_argument("--category", choices=SUBSET_CATEGORIES + ("all",), default=None)
    return p


def _dump_dir(args) -> Path | None:
    if not (args.dump_traces or args.dump_buffer):
        return None
    if args.dump_dir:
        return Path(args.dump_dir)
    return Path(f"{args.out}.dumps") if args.out else Path("dumps")


def execute(args) -> str:
    if args.config:
        cfg, grid = load_config(args.config)
    else:
        cfg, grid = ExperimentConfig(), GridSpec()
    if args.seeds:
        cfg = replace(cfg, seeds=parse_seeds(args.seeds))
    if args.ood_sigma is not None:
        cfg = replace(cfg, ood_sigma=args.ood_sigma)
    if args.timing:
        cfg = replace(cfg, timing=True)
    dumps = dict(dump_dir=_dump_dir(args), dump_traces=args.dump_traces,
                 dump_buffer=args.dump_buffer)

    if args.command == "run":
        if args.method:
            cfg = replace(cfg, method=args.method)
        rows = run_config(cfg, **(dumps if cfg.method != "offline-subset" else {}))
    elif args.command == "grid":
        rows = run_grid(cfg, grid.class_strategies, grid.sample_strategies, **dumps)
    else:
        fraction = cfg.retain_fraction if args.fraction is None else args.fraction
        category = args.category or cfg.subset_category
        cats = SUBSET_CATEGORIES if category == "all" else (category,)
        rows = sort_rows(run_subset_study(cfg, fraction, c, s) for c in cats for s in cfg.seeds)

    if args.out:
        emit_results(rows, args.out, args.format)
        return ""
    return format_results(rows, args.format)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = execute(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"caspsim: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
