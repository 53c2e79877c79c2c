"""Command-line entry point: ``exalt run|synth|explain|validate``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
Log verbosity comes from the EXALT_LOG environment variable
(error, warn, info, debug).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import dataset, validation
from ._version import __version__
from .config import ShapSpec, load_config
from .errors import ConfigError, DataError, ExaltError, StageError
from .pipeline import run_explain, run_pipeline

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
SYNTH_FAMILIES = ("blobs", "sequences", "multistage")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _setup_logging():
    level = os.environ.get("EXALT_LOG", "warn").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"EXALT_LOG={level!r} invalid; valid: {', '.join(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="exalt", description="Explainable clustering pipeline.")
    p.add_argument("--version", action="version", version=f"exalt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the full pipeline from a JSON config")
    r.add_argument("config")
    r.add_argument("-o", "--out-dir")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, default=os.cpu_count())
    r.add_argument("--format", choices=("json", "markdown", "both"))

    s = sub.add_parser("synth", help="write a synthetic ground-truth dataset as CSV")
    s.add_argument("family", choices=SYNTH_FAMILIES)
    s.add_argument("-o", "--out", required=True, help="output CSV path")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--per-cluster", type=int, default=50)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--separation", type=float, default=10.0)
    s.add_argument("--base-len", type=int, default=40)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--warp", type=float, default=0.2)
    s.add_argument("--stages", type=int, default=5)
    s.add_argument("--walk-len", type=int, default=50)
    s.add_argument("--chain", choices=("dirichlet", "deterministic", "shared"), default="dirichlet")
    s.add_argument("--seed", type=int, default=42)

    e = sub.add_parser("explain", help="surrogate tree + SHAP for an already labeled CSV")
    e.add_argument("csv")
    e.add_argument("--labels", required=True, help="label column")
    e.add_argument("--truth", help="optional ground-truth column")
    e.add_argument("-o", "--out-dir", default="exalt_out")
    e.add_argument("--max-depth", type=int, default=4)
    e.add_argument("--min-leaf", type=int)
    e.add_argument("--shap", choices=("tree", "kernel"), default="tree")
    e.add_argument("--seed", type=int, default=42)
    e.add_argument("--format", choices=("json", "markdown", "both"), default="both")

    v = sub.add_parser("validate", help="internal and external scores for a labeled CSV")
    v.add_argument("csv")
    v.add_argument("--labels", required=True)
    v.add_argument("--truth")
    v.add_argument("--no-standardize", action="store_true")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config, {"out_dir": args.out_dir, "seed": args.seed, "format": args.format})
    res = run_pipeline(cfg, threads=args.threads)
    for path in res.files.values():
        print(path)
    return 0


def _cmd_synth(args) -> int:
    if args.family == "blobs":
        ds = dataset.gen_blobs(args.k, args.per_cluster, args.d, args.separation, args.seed)
    elif args.family == "sequences":
        ds = dataset.gen_event_sequences(args.k, args.per_cluster, args.base_len, args.noise, args.seed, args.warp)
    else:
        ds = dataset.gen_multistage(args.k, args.per_cluster, args.stages, args.seed, args.walk_len, args.chain)
    dataset.write_csv(ds, args.out)
    return 0


def _read_labeled(path, labels_col, truth_col):
    cols = [labels_col] + ([truth_col] if truth_col and truth_col != labels_col else [])
    try:
        ds, labels = dataset.load_csv_columns(path, cols)
    except OSError as err:
        raise StageError("load", str(err)) from None
    except DataError as err:
        raise StageError("load", str(err)) from None
    truth = labels[truth_col] if truth_col else None
    return ds.replace(truth=truth), labels[labels_col]


def _cmd_explain(args) -> int:
    ds, labels = _read_labeled(args.csv, args.labels, args.truth)
    spec = ShapSpec(method=args.shap)
    res = run_explain(ds, labels, args.labels, args.max_depth, args.min_leaf, spec, args.seed,
                      args.out_dir, args.format)
    for path in res.files.values():
        print(path)
    return 0


def _cmd_validate(args) -> int:
    ds, labels = _read_labeled(args.csv, args.labels, args.truth)
    if not args.no_standardize and ds.n >= 2:
        ds, _ = dataset.standardize(ds)
    try:
        scores = validation.validate(ds, labels, ds.truth)
    except DataError as err:
        raise StageError("validate", str(err)) from None
    print(json.dumps(scores.to_dict(), indent=2))
    return 0


COMMANDS = {"run": _cmd_run, "synth": _cmd_synth, "explain": _cmd_explain, "validate": _cmd_validate}


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ExaltError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
