"""Command-line entry point: ``guessbench {simulate,analyze,oos,report,ewa}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..ewa import EwaParams, dump_attractions, init_attractions, one_shot_distribution
from ..game import GameSpec
from ..human import HumanDataError, fixture_path, load_human_csv
from .analyze import analyze, load_traces, write_metrics
from .config import ConfigError, load_config
from .oos import MissingBaselineError, validate_oos
from .report import report
from .simulate import RunManifest, simulate


def _simulate(args) -> int:
    cfg = load_config(args.config, output_dir=args.out)
    manifest = simulate(cfg, resume=args.resume)
    print(json.dumps({"output_dir": str(cfg.output_dir), "cells": len(manifest.cells),
                      "network_calls": manifest.network_calls}, sort_keys=True))
    return 0


def _analyze(args) -> int:
    run = Path(args.traces)
    game = GameSpec()
    manifest = run / "manifest.json"
    if manifest.exists():
        game = GameSpec.from_dict(RunManifest.read(manifest).game)
    student, expert = load_human_csv(args.human or fixture_path(), game)
    flags = None
    if args.config:
        flags = load_config(args.config).analysis
    traces = load_traces(run)
    tables = analyze(traces, student, expert, flags) if flags else analyze(traces, student, expert)
    out = Path(args.out) if args.out else (run / "metrics")
    write_metrics(tables, out)
    print(json.dumps({"metrics": str(out), "tables": sorted(tables)}, sort_keys=True))
    return 0


def _oos(args) -> int:
    cfg = load_config(args.config, output_dir=args.out)
    tables = validate_oos(cfg, args.baseline, resume=args.resume)
    print(json.dumps({"metrics": str(Path(cfg.output_dir) / "metrics"), "tables": sorted(tables)},
                     sort_keys=True))
    return 0


def _report(args) -> int:
    summary = report(args.metrics, args.out, with_svg=args.svg)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _ewa(args) -> int:
    game = GameSpec(low=args.low, high=args.high)
    params = EwaParams(denominator_plus_one=args.denominator_plus_one)
    probs = one_shot_distribution(game, params)
    guesses = np.arange(game.low, game.high + 1)
    mean = float(probs @ guesses)
    sd = float(np.sqrt(probs @ (guesses - mean) ** 2))
    if args.dump:
        dump_attractions(init_attractions(game, params), args.dump)
    print(json.dumps({"mean": mean, "sd": sd, "p_zero": float(probs[0]),
                      "mode": int(guesses[np.argmax(probs)])}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="guessbench", description="Beauty-contest agent benchmark")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run every configured cell and write traces")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--resume", action="store_true", help="keep completed episodes")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("analyze", help="compute metric tables from traces")
    p.add_argument("--traces", required=True, help="run directory or its traces/ subdirectory")
    p.add_argument("--human", help="cohort,guess CSV (default: bundled synthetic fixture)")
    p.add_argument("--config", help="experiment config whose analysis flags apply")
    p.add_argument("--out", help="metrics directory (default: <traces>/metrics)")
    p.set_defaults(func=_analyze)

    p = sub.add_parser("oos", help="shifted-range run compared against a baseline run")
    p.add_argument("--config", required=True)
    p.add_argument("--baseline", required=True, help="baseline run directory")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_oos)

    p = sub.add_parser("report", help="render tables, layouts and figures")
    p.add_argument("--metrics", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=_report)

    p = sub.add_parser("ewa", help="summarise the one-shot EWA distribution")
    p.add_argument("--low", type=int, default=0)
    p.add_argument("--high", type=int, default=100)
    p.add_argument("--denominator-plus-one", action="store_true")
    p.add_argument("--dump", help="write initial attractions to this CSV")
    p.set_defaults(func=_ewa)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, HumanDataError, MissingBaselineError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
