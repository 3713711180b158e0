"""Command line: ``driftcast <subcommand> [--config F] [--seed S] [--seeds N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import ConfigError, load_config
from .experiments import (
    ZEROSHOT_METHODS, cmd_build_data, cmd_eval_drift, cmd_eval_fewshot, cmd_eval_ho,
    cmd_eval_zeroshot, cmd_meta_train, cmd_report, load_bundle_config, seed_list,
)
from .forecaster import CheckpointError
from .mobility import SPEED_SHIFT, SUDDEN_TURN, IngestError


def _common(p: argparse.ArgumentParser, data=True, checkpoint=True) -> None:
    p.add_argument("--config", help="key=value config file (defaults when omitted)")
    p.add_argument("--seed", type=int, help="first seed (config 'seed' by default)")
    p.add_argument("--seeds", type=int, help="number of consecutive seeds (config 'seeds')")
    p.add_argument("--out", help="output directory")
    if data:
        p.add_argument("--data", help="dataset bundle written by build-data")
    if checkpoint:
        p.add_argument("--checkpoint", help="meta-trained checkpoint to use as the Reptile init")


def _csv(kind):
    return lambda s: tuple(kind(x) for x in s.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="driftcast", description=__doc__)
    ap.add_argument("--version", action="version", version=f"driftcast {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-data", help="generate or ingest trajectories, build tasks, split")
    _common(p, data=False, checkpoint=False)
    p.add_argument("--input-csv", help="time,lat,lon trace file to ingest instead of simulating")

    p = sub.add_parser("meta-train", help="meta-train and write checkpoints")
    _common(p, checkpoint=False)
    p.add_argument("--methods", type=_csv(str), default=("reptile",))

    p = sub.add_parser("eval-zeroshot", help="forecast error on unseen tasks, no adaptation")
    _common(p)
    p.add_argument("--methods", type=_csv(str), default=ZEROSHOT_METHODS)

    p = sub.add_parser("eval-fewshot", help="forecast error after n-shot adaptation")
    _common(p)
    p.add_argument("--shots", type=_csv(int))

    p = sub.add_parser("eval-drift", help="recovery after a sudden turn or speed shift")
    _common(p)
    p.add_argument("--scenario", choices=(SUDDEN_TURN, SPEED_SHIFT), required=True)
    p.add_argument("--traces", action="store_true", help="write per-stream trace CSVs")

    p = sub.add_parser("eval-ho", help="handover prediction metrics")
    _common(p)

    p = sub.add_parser("report", help="merge run directories into summary tables")
    p.add_argument("runs", nargs="+", help="directories containing report.json")
    p.add_argument("--out", help="output directory")
    return ap


def _config(args):
    overrides = {}
    if getattr(args, "input_csv", None):
        overrides["input_csv"] = args.input_csv
    if getattr(args, "data", None) and not args.config:
        cfg = load_bundle_config(args.data)
        return cfg.with_overrides(**overrides) if overrides else cfg
    return load_config(args.config, **overrides)


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(args.runs, args.out)
    cfg = _config(args)
    seeds = seed_list(cfg, args.seed, args.seeds)
    data, ckpt = getattr(args, "data", None), getattr(args, "checkpoint", None)
    if args.command == "build-data":
        return cmd_build_data(cfg, seeds, args.out)
    if args.command == "meta-train":
        return cmd_meta_train(cfg, seeds, args.out, args.methods, data)
    if args.command == "eval-zeroshot":
        return cmd_eval_zeroshot(cfg, seeds, args.out, args.methods, ckpt, data)
    if args.command == "eval-fewshot":
        return cmd_eval_fewshot(cfg, seeds, args.out, args.shots, checkpoint=ckpt, data=data)
    if args.command == "eval-drift":
        return cmd_eval_drift(cfg, seeds, args.scenario, args.out, ckpt, data, args.traces)
    if args.command == "eval-ho":
        return cmd_eval_ho(cfg, seeds, args.out, ckpt, data)
    raise AssertionError(args.command)


def main(argv=None) -> int:
    try:
        report = run(argv)
    except (ConfigError, CheckpointError, IngestError, ValueError, OSError) as exc:
        kind = type(exc).__name__
        print(json.dumps({"error": kind, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 2
    agg = report.get("aggregate")
    if agg:
        for key, a in agg.items():
            print(f"{key:32s} {a['mean']:.4f} +/- {a['std']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
