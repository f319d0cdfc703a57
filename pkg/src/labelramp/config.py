"""Experiment configuration.

Configs live in flat UTF-8 ``key = value`` files with ``#`` comments; every
key can also be overridden by a CLI flag of the same name. Schedule keys
keep their short conventional names (``b``, ``m``, ``E``, ``interval_lr``,
``epsilon``, ``threshold_T``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .compensation import ACConfig
from .curriculum import ORDER_POLICIES, Schedule
from .errors import ConfigError
from .nncore import OptimHyper

DATASETS = ("blobs", "cifar10", "cifar100")


@dataclass
class ExperimentConfig:
    # data
    dataset: str = "blobs"
    data_path: str = ""  # directory with CIFAR binaries when dataset is cifar10/100
    data_seed: int = 7  # blobs generation; shared by all trials
    blobs_classes: int = 8
    blobs_per_class: int = 250
    blobs_dim: int = 16
    blobs_sep: float = 6.0
    # training
    variant: str = "batch"
    total_epochs: int = 40  # budget after the staged window, equal for every variant
    batch_size: int = 128
    base_lr: float = 0.1
    milestones: tuple[int, ...] = (25, 35)
    gamma: float = 0.2
    weight_decay: float = 0.0005
    momentum: float = 0.9
    nesterov: bool = True
    hidden: tuple[int, ...] = (64,)
    # staged label window
    b: int = 0  # initially revealed labels; 0 means half the label count
    m: int = 2  # labels revealed per interval
    E: int = 3  # epochs per interval
    interval_lr: float = 0.0  # learning rate inside the window; 0 means base_lr
    order_policy: str = "ascending"
    # compensation
    epsilon: float = 0.5
    threshold_T: int = 20  # first compensated epoch, counted after the window
    # label smoothing baseline
    ls_alpha: float = 0.1
    # harness
    trials: int = 5
    seed: int = 0
    probe_every: int = 10  # probe/cluster cadence in epochs; 0 disables
    out: str = ""  # output directory; empty means no files

    def resolved_b(self, label_count: int) -> int:
        return self.b if self.b > 0 else label_count // 2

    def resolved_interval_lr(self) -> float:
        return self.interval_lr if self.interval_lr > 0 else self.base_lr

    def optim_hyper(self) -> OptimHyper:
        return OptimHyper(
            base_lr=self.base_lr,
            milestones=self.milestones,
            gamma=self.gamma,
            weight_decay=self.weight_decay,
            momentum=self.momentum,
            nesterov=self.nesterov,
        )

    def schedule(self, label_count: int) -> Schedule:
        return Schedule(
            initial=self.resolved_b(label_count),
            step=self.m,
            epochs_per_interval=self.E,
            lr=self.resolved_interval_lr(),
        )

    def ac_config(self) -> ACConfig:
        return ACConfig(epsilon=self.epsilon, threshold_epoch=self.threshold_T)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"expected integers, got {text!r}") from exc


def coerce_value(key: str, text: str):
    """Convert the string form of a config value to the field's type."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _FIELDS[key].type
    text = text.strip()
    try:
        if typ == "bool":
            return _parse_bool(text)
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
        if typ.startswith("tuple"):
            return _parse_int_tuple(text)
        return text
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (optional) and apply string overrides on top."""
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        raw.update(parse_config_text(p.read_text(encoding="utf-8")))
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                raw[key] = value
    cfg = ExperimentConfig(**{k: coerce_value(k, v) for k, v in raw.items()})
    validate(cfg)
    return cfg


# Variant groupings shared with the runner.
VARIANTS = ("batch", "label_smoothing", "dbs", "ra", "only_il", "only_ac", "il_ac", "ls_il_ac")
IL_VARIANTS = frozenset(("only_il", "ra", "il_ac", "ls_il_ac"))
WINDOW_VARIANTS = IL_VARIANTS | {"dbs"}
AC_VARIANTS = frozenset(("only_ac", "il_ac", "ls_il_ac"))
LS_VARIANTS = frozenset(("label_smoothing", "ls_il_ac"))


def validate(cfg: ExperimentConfig):
    """Checks that do not depend on the loaded dataset."""
    if cfg.dataset not in DATASETS:
        raise ConfigError(f"unknown dataset {cfg.dataset!r}; pick one of {DATASETS}")
    if cfg.dataset != "blobs" and not cfg.data_path:
        raise ConfigError(f"dataset {cfg.dataset} needs data_path")
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {cfg.variant!r}; pick one of {VARIANTS}")
    if cfg.total_epochs < 1:
        raise ConfigError("total_epochs must be at least 1")
    if cfg.batch_size < 1:
        raise ConfigError("batch_size must be positive")
    if cfg.trials < 1:
        raise ConfigError("trials must be at least 1")
    if cfg.seed < 0 or cfg.data_seed < 0:
        raise ConfigError("seeds must be non-negative")
    if cfg.probe_every < 0:
        raise ConfigError("probe_every must be non-negative")
    if cfg.probe_every > 0 and not cfg.hidden:
        raise ConfigError("probing needs at least one hidden layer")
    if cfg.b < 0 or cfg.m < 1 or cfg.E < 1:
        raise ConfigError("schedule needs b >= 0, m >= 1, E >= 1")
    if cfg.interval_lr < 0:
        raise ConfigError("interval_lr must be non-negative (0 means base_lr)")
    if not 0 < cfg.epsilon <= 1:
        raise ConfigError("epsilon must be in (0, 1]")
    if not 0 <= cfg.ls_alpha < 1:
        raise ConfigError("ls_alpha must be in [0, 1)")
    if cfg.order_policy not in ORDER_POLICIES:
        raise ConfigError(f"order_policy must be one of {ORDER_POLICIES}")
    if cfg.variant in AC_VARIANTS and not 0 <= cfg.threshold_T < cfg.total_epochs:
        raise ConfigError(
            f"threshold_T must lie in [0, total_epochs) for {cfg.variant}, got {cfg.threshold_T}"
        )
    if cfg.dataset == "blobs":
        if cfg.blobs_classes < 2 or cfg.blobs_dim < 1 or cfg.blobs_sep <= 0:
            raise ConfigError("blobs need classes >= 2, dim >= 1, sep > 0")
        if cfg.blobs_per_class < 5:
            raise ConfigError("blobs need at least 5 samples per class")
    # triggers OptimHyper's own validation early
    cfg.optim_hyper()


def validate_with_data(cfg: ExperimentConfig, label_count: int, train_size: int):
    """Checks that need the loaded dataset; run before any training."""
    if cfg.batch_size > train_size:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds training set size {train_size}")
    resolved = cfg.resolved_b(label_count)
    if not 1 <= resolved <= label_count:
        raise ConfigError(f"b resolves to {resolved}, outside [1, {label_count}]")
    if cfg.variant in AC_VARIANTS and cfg.epsilon * label_count <= 1:
        raise ConfigError(
            f"epsilon {cfg.epsilon} too small for {label_count} labels "
            "(epsilon * label_count must exceed 1)"
        )
