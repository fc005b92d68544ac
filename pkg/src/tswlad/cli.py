"""Command line entry point.

    tswlad run --config FILE [--seeds N] [--out DIR] [--algo tswlad|baseline|both]
    tswlad run --preset {table1,fig-regret,sentencing-demo} [--seeds N] [--out DIR]
    tswlad validate --config FILE
    tswlad dataset check FILE

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, TswladError
from .experiment import PRESETS, ExperimentConfig, load_dataset, preset, run_experiment


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tswlad", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset", choices=PRESETS)
    run.add_argument("--seeds", type=int, help="number of seeds (overrides the config)")
    run.add_argument("--out", type=Path, help="output directory for CSVs and report.json")
    run.add_argument("--algo", choices=("tswlad", "baseline", "both"))
    run.add_argument("--parallelism", type=int)

    val = sub.add_parser("validate", help="validate a config file")
    val.add_argument("--config", type=Path, required=True)

    ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)
    chk = ds_sub.add_parser("check", help="check a dataset CSV against the schema")
    chk.add_argument("file", type=Path)
    return p


def _run(args) -> int:
    out = args.out
    if args.config is not None:
        configs = [ExperimentConfig.load(args.config)]
    else:
        workdir = out if out is not None else Path(".")
        configs = preset(args.preset, n_seeds=args.seeds, workdir=workdir)
    multi = len(configs) > 1
    for cfg in configs:
        if args.seeds is not None and args.config is not None:
            cfg.run.pop("seeds", None)
            cfg.run["n_seeds"] = args.seeds
        if args.algo is not None:
            cfg.estimator["algorithm"] = args.algo
        cfg.validate()
        cfg_out = out
        if out is not None and multi:
            cfg_out = out / cfg.run.get("label", "run")
        report = run_experiment(cfg, out=cfg_out, parallelism=args.parallelism)
        summary = {"label": report.label, "aggregates": report.aggregates}
        if report.accuracy:
            summary["accuracy"] = report.accuracy
        print(json.dumps(summary, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "validate":
            cfg = ExperimentConfig.load(args.config)
            print(f"ok: {args.config} (sha256 {cfg.digest()[:12]})")
            return 0
        if args.command == "dataset":
            data = load_dataset(args.file)
            d = data[0].phi.size if data else 0
            print(f"ok: {args.file}: {len(data)} rows, d={d}")
            return 0
    except TswladError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 1


if __name__ == "__main__":
    sys.exit(main())
