"""Command-line front end.

``labelramp run --config <path> [--<key> <value> ...]`` runs one experiment,
``labelramp sweep --config <path> --param <name> --values <list>`` sweeps one
parameter. Every config key doubles as a flag of the same name. Exit codes:
0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericError
from .harness import run_experiment, sweep

_CONFIG_FIELDS = [f.name for f in dataclasses.fields(ExperimentConfig)]


def _add_config_flags(parser: argparse.ArgumentParser):
    for name in _CONFIG_FIELDS:
        parser.add_argument(f"--{name}", default=None, metavar="VALUE",
                            help=f"override config key '{name}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelramp",
        description="Train classifiers with staged label introduction and "
                    "compensation of misclassified samples.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="run one experiment (all trials of one variant)")
    run_cmd.add_argument("--config", required=True, help="flat key = value config file")
    _add_config_flags(run_cmd)

    sweep_cmd = commands.add_parser("sweep", help="run one experiment per sweep value")
    sweep_cmd.add_argument("--config", required=True, help="flat key = value config file")
    sweep_cmd.add_argument("--param", required=True,
                           help="one of: epsilon, m, E, label_order")
    sweep_cmd.add_argument("--values", required=True,
                           help="comma-separated list of sweep values")
    _add_config_flags(sweep_cmd)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {name: getattr(args, name) for name in _CONFIG_FIELDS
            if getattr(args, name) is not None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "run":
            agg = run_experiment(cfg)
            print(
                f"variant={agg.variant} trials={len(agg.trials)} "
                f"mean_test_acc={agg.mean:.3f} std={agg.std:.3f}"
            )
            for report in agg.trials:
                print(f"  seed={report.seed} final_test_acc={report.final_test_acc:.3f}")
        else:
            values = [v for v in (s.strip() for s in args.values.split(",")) if v]
            if not values:
                raise ConfigError("--values is empty")
            entries = sweep(cfg, args.param, values)
            print(f"sweep of {args.param} ({cfg.variant}, {cfg.trials} trial(s) per value)")
            for value, agg in entries:
                print(f"  {args.param}={value}: mean_test_acc={agg.mean:.3f} std={agg.std:.3f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
