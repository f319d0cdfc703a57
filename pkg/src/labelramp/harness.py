"""Experiment orchestration: datasets, multi-trial runs, sweeps, CSV output."""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

from .baselines import run_variant
from .config import ExperimentConfig, validate, validate_with_data
from .data import load_cifar10, load_cifar100, make_blobs
from .errors import ConfigError
from .reporting import (
    AggregateReport,
    aggregate,
    write_summary_csv,
    write_sweep_csv,
    write_trial_csv,
)

SWEEP_PARAMS = {
    "epsilon": ("epsilon", float),
    "m": ("m", int),
    "E": ("E", int),
    "label_order": ("order_policy", str),
}


def build_datasets(cfg: ExperimentConfig):
    if cfg.dataset == "blobs":
        return make_blobs(
            cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim, cfg.blobs_sep, cfg.data_seed
        )
    if cfg.dataset == "cifar10":
        return load_cifar10(cfg.data_path)
    return load_cifar100(cfg.data_path)


def run_experiment(cfg: ExperimentConfig, observer=None) -> AggregateReport:
    """Run ``cfg.trials`` trials with seeds seed, seed+1, ... and aggregate.

    With ``cfg.out`` set, writes one metrics CSV per trial plus a summary
    CSV; identical configs produce byte-identical files.
    """
    validate(cfg)
    train, test = build_datasets(cfg)
    validate_with_data(cfg, train.label_count, train.n)
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    reports = []
    for i in range(cfg.trials):
        report = run_variant(cfg.variant, train, test, cfg, cfg.seed + i, observer)
        reports.append(report)
        if out is not None:
            write_trial_csv(out / f"trial_{i:02d}.csv", report)
    mean, std = aggregate([r.final_test_acc for r in reports])
    if cfg.trials == 1:
        print("note: single trial, std reported as 0 by convention", file=sys.stderr)
    result = AggregateReport(cfg.variant, reports, mean, std)
    if out is not None:
        write_summary_csv(out / "summary.csv", result)
    return result


def sweep(cfg: ExperimentConfig, parameter: str, values):
    """One aggregate per value of ``parameter``; returns [(value, AggregateReport)].

    Sweepable parameters: epsilon, m, E, label_order. With ``cfg.out`` set,
    per-value runs land in subdirectories and the whole table in
    ``sweep_<parameter>.csv``.
    """
    if parameter not in SWEEP_PARAMS:
        raise ConfigError(
            f"unknown sweep parameter {parameter!r}; pick one of {sorted(SWEEP_PARAMS)}"
        )
    field, typ = SWEEP_PARAMS[parameter]
    base_out = Path(cfg.out) if cfg.out else None
    entries = []
    for value in values:
        try:
            val = typ(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {value!r} for sweep parameter {parameter}") from exc
        sub = str(base_out / f"{parameter}_{val}") if base_out is not None else ""
        run_cfg = dataclasses.replace(cfg, **{field: val}, out=sub)
        entries.append((val, run_experiment(run_cfg)))
    if base_out is not None:
        base_out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(base_out / f"sweep_{parameter}.csv", parameter, entries)
    return entries
