"""Command-line entry point.

Verbs:
  run <config.yaml>   -- execute the configured sweep
  report <manifest>   -- regenerate the aggregate report and figures
  synth <preset>      -- run a built-in synthetic preset end-to-end
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError
from .experiment import (
    ExperimentConfig,
    emit_report,
    read_metrics_csv,
    run_experiment,
)
from .figures import improvement_bar_figure

logger = logging.getLogger("mdgan")

PRESETS = {
    "quick": {
        "dataset": {
            "name": "blob-quick",
            "synthetic": {"kind": "blob", "n_normal": 400, "n_anomaly": 60,
                          "dim": 8, "separation": 4.0, "seed": 7},
        },
        "train": {"epochs": 5, "batch_size": 64, "warm_ups": [0, 1]},
        "run": {"seeds": [0, 1], "output_dir": "mdgan-quick"},
    },
    "blob": {
        "dataset": {
            "name": "blob",
            "synthetic": {"kind": "blob", "n_normal": 900, "n_anomaly": 100,
                          "dim": 8, "separation": 4.0, "seed": 7},
        },
        "train": {"epochs": 30, "batch_size": 64, "warm_ups": [0, 1, 3, 6]},
        "run": {"seeds": [0, 1, 2, 3, 4], "output_dir": "mdgan-blob"},
    },
}


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_yaml(args.config)
    return _execute(config, args)


def _cmd_synth(args) -> int:
    preset = PRESETS.get(args.preset)
    if preset is None:
        raise ConfigurationError(
            f"unknown preset '{args.preset}' (have: {', '.join(sorted(PRESETS))})"
        )
    config = ExperimentConfig.from_dict(preset)
    return _execute(config, args)


def _execute(config: ExperimentConfig, args) -> int:
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.jobs:
        config.jobs = args.jobs
    logger.info("running %d seeds x %d warm-up configs on '%s'",
                len(config.seeds), len(config.warm_ups), config.dataset_name)
    manifest = run_experiment(config)
    out_dir = Path(config.output_dir)
    failed = [r for r in manifest["runs"] if r["status"] != "completed"]
    for r in manifest["runs"]:
        logger.info("seed %s %s: %s (%.1fs)",
                    r["seed"], r["config"], r["status"], r["seconds"])
    print(f"wrote {len(manifest['artifacts'])} artifacts to {out_dir}")
    if failed:
        print(f"{len(failed)} of {len(manifest['runs'])} runs failed:", file=sys.stderr)
        for r in failed:
            print(f"  seed {r['seed']} {r['config']}: {r['status']}", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    out_dir = Path(args.output_dir or Path(args.manifest).parent)
    records = read_metrics_csv(Path(args.manifest).parent / "metrics.csv")
    written = emit_report(records, out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    bar = improvement_bar_figure(records, fig_dir / "improvement.png")
    if bar is not None:
        written.append(bar)
    print(f"report for config {manifest['config_id']}:")
    for path in written:
        print(f"  {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdgan",
        description="Two-discriminator GAN anomaly detection experiments",
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="YAML experiment config")
    p_run.add_argument("-o", "--output-dir", default=None)
    p_run.add_argument("-j", "--jobs", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="regenerate reports from a manifest")
    p_rep.add_argument("manifest", help="path to manifest.json")
    p_rep.add_argument("-o", "--output-dir", default=None)
    p_rep.set_defaults(func=_cmd_report)

    p_syn = sub.add_parser("synth", help="run a synthetic preset")
    p_syn.add_argument("preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    p_syn.add_argument("-o", "--output-dir", default=None)
    p_syn.add_argument("-j", "--jobs", type=int, default=None)
    p_syn.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
