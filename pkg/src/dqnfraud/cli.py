"""Command-line front end.

    dqnfraud synth      --config run.json --out DIR
    dqnfraud train      --config run.json --out DIR [--seed N]
    dqnfraud eval       --config run.json --out DIR [--checkpoint PATH]
    dqnfraud compare    --config a.json --config b.json ... --out DIR
    dqnfraud sweep-beta --config run.json --betas 0.5,1,3 [--replicas 3] --out DIR

Exit status is 0 on success. Failures print one JSON line
``{"error": ..., "kind": ...}`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import pipeline
from ._backend import BACKEND
from .config import ConfigError, load_config, with_overrides
from .data import IngestionError
from .neuralnet import CheckpointError


def _load(path, args):
    cfg = load_config(path)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    cfg = with_overrides(cfg, **changes) if changes else cfg
    if not cfg.out_dir:
        raise ConfigError("no output directory: pass --out or set out_dir in the config")
    return cfg


def _betas(text):
    try:
        values = [float(b) for b in text.split(",") if b.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad beta list {text!r}") from exc
    if not values or any(b <= 0 for b in values):
        raise argparse.ArgumentTypeError("betas must be positive numbers")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="dqnfraud", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", required=True, help="run config JSON (repeatable)")
        else:
            p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        return p

    common(sub.add_parser("synth", help="write the configured synthetic dataset as CSV"))
    common(sub.add_parser("train", help="train the configured model"))
    p = common(sub.add_parser("eval", help="evaluate a checkpoint on the test split"))
    p.add_argument("--checkpoint", default=None, help="defaults to OUT/checkpoint.json")
    p = common(sub.add_parser("compare", help="train+evaluate several configs into one table"), multi=True)
    p.add_argument("--jobs", type=int, default=1)
    p = common(sub.add_parser("sweep-beta", help="seed-averaged metrics over beta values"))
    p.add_argument("--betas", type=_betas, required=True, help="comma-separated, e.g. 0.5,1,3")
    p.add_argument("--replicas", type=int, default=1, help="seed replicas per beta")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def run(args):
    if args.command == "compare":
        configs = [_load(path, args) for path in args.config]
        out = args.out or configs[0].out_dir
        rows = pipeline.run_compare(configs, out, n_jobs=args.jobs)
        return {"table": os.path.join(out, pipeline.COMPARE_CSV), "rows": len(rows)}

    cfg = _load(args.config, args)
    out = cfg.out_dir
    if args.command == "synth":
        return {"dataset": pipeline.write_synth(cfg, out)}
    if args.command == "train":
        model, _ = pipeline.run_train(cfg, out)
        return {"checkpoint": os.path.join(out, pipeline.CHECKPOINT), "episodes": len(model.log_rows)}
    if args.command == "eval":
        ckpt = args.checkpoint or os.path.join(out, pipeline.CHECKPOINT)
        report, _, _ = pipeline.run_eval(cfg, ckpt, out)
        return {"metrics": os.path.join(out, pipeline.METRICS), "f1": report.f1,
                "approval_pct": report.approval_pct, "fraud_bps": report.fraud_bps}
    if args.command == "sweep-beta":
        rows, _ = pipeline.run_sweep_beta(cfg, args.betas, out, replicas=args.replicas, n_jobs=args.jobs)
        return {"table": os.path.join(out, pipeline.SWEEP_CSV), "rows": len(rows)}
    raise AssertionError(args.command)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    logging.getLogger(__name__).info("kernel backend: %s", BACKEND)
    try:
        summary = run(args)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return 2
    except (IngestionError, CheckpointError, FileNotFoundError) as exc:
        kind = "ingestion" if isinstance(exc, IngestionError) else "input"
        print(json.dumps({"error": str(exc), "kind": kind}), file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}", "kind": "runtime"}), file=sys.stderr)
        return 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
