"""Metric rows, trial/aggregate reports, and CSV emission.

Floats are written with ``repr`` (shortest round-trip form) and files use
"\\n" line endings, so identical runs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from statistics import fmean, stdev

from .errors import ConfigError

CSV_COLUMNS = (
    "epoch",
    "phase",
    "revealed_labels",
    "lr",
    "train_loss",
    "train_acc",
    "test_acc",
    "ac_modified_count",
    "probe_acc",
    "cluster_acc",
)

# Columns that measure the run; phase tags and compensation bookkeeping
# legitimately differ between variants that follow the same trajectory.
METRIC_COLUMNS = (
    "epoch",
    "revealed_labels",
    "lr",
    "train_loss",
    "train_acc",
    "test_acc",
    "probe_acc",
    "cluster_acc",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class EpochRow:
    """One metrics row; optional columns stay None when not measured."""

    epoch: int
    phase: str  # "IL" | "standard" | "AC"
    revealed_labels: int
    lr: float
    train_loss: float
    train_acc: float
    test_acc: float
    ac_modified_count: int | None = None
    probe_acc: float | None = None
    cluster_acc: float | None = None

    def __post_init__(self):
        self.lr = float(self.lr)
        self.train_loss = float(self.train_loss)
        self.train_acc = float(self.train_acc)
        self.test_acc = float(self.test_acc)
        if self.probe_acc is not None:
            self.probe_acc = float(self.probe_acc)
        if self.cluster_acc is not None:
            self.cluster_acc = float(self.cluster_acc)

    def csv_cells(self) -> list[str]:
        return [_cell(getattr(self, col)) for col in CSV_COLUMNS]

    def metric_cells(self) -> tuple[str, ...]:
        return tuple(_cell(getattr(self, col)) for col in METRIC_COLUMNS)


@dataclass
class TrialReport:
    """All epoch rows of one seeded trial."""

    variant: str
    seed: int
    rows: list[EpochRow]
    window_epochs: int = 0

    @property
    def final_test_acc(self) -> float:
        return self.rows[-1].test_acc

    def phase_counts(self) -> dict[str, int]:
        counts = {"IL": 0, "standard": 0, "AC": 0}
        for row in self.rows:
            counts[row.phase] += 1
        return counts


@dataclass
class AggregateReport:
    """Mean and sample standard deviation of final test accuracy over trials."""

    variant: str
    trials: list[TrialReport]
    mean: float
    std: float

    @property
    def finals(self) -> list[float]:
        return [t.final_test_acc for t in self.trials]


def aggregate(values) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation; one value -> std 0."""
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("nothing to aggregate")
    if len(values) == 1:
        return values[0], 0.0
    return fmean(values), stdev(values)


def write_trial_csv(path, report: TrialReport):
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(",".join(row.csv_cells()) for row in report.rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_csv(path, report: AggregateReport):
    lines = [
        "variant,trials,mean_test_acc,std_test_acc,per_trial_test_acc",
        ",".join(
            [
                report.variant,
                str(len(report.trials)),
                repr(float(report.mean)),
                repr(float(report.std)),
                ";".join(repr(float(v)) for v in report.finals),
            ]
        ),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweep_csv(path, parameter: str, entries):
    """``entries`` is a list of (value, AggregateReport)."""
    lines = ["param,value,trials,mean_test_acc,std_test_acc,per_trial_test_acc"]
    for value, agg in entries:
        lines.append(
            ",".join(
                [
                    parameter,
                    _cell(value),
                    str(len(agg.trials)),
                    repr(float(agg.mean)),
                    repr(float(agg.std)),
                    ";".join(repr(float(v)) for v in agg.finals),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
