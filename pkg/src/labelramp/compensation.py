"""Compensation of misclassified samples.

Once every label is in play, each epoch consults a frozen copy of the
previous epoch's model: samples it misclassified train against a smoothed
target distribution whose peak stays on the true label, everything else
keeps its hard target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, shuffled_batches
from .errors import ConfigError
from .nncore import (
    Model,
    ModelSnapshot,
    OptimHyper,
    forward,
    lr_at_epoch,
    one_hot_rows,
    snapshot,
    train_batches,
)


@dataclass(frozen=True)
class ACConfig:
    """Smoothing strength and the epoch the compensation phase starts at.

    ``epsilon`` is the mass left on the true label; ``epsilon * L > 1`` must
    hold for the smoothed target to keep its argmax there (validated where
    the label count is known).
    """

    epsilon: float
    threshold_epoch: int

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ConfigError("epsilon must be in (0, 1]")
        if self.threshold_epoch < 0:
            raise ConfigError("threshold epoch must be non-negative")


def ac_target(label: int, label_count: int, epsilon: float) -> np.ndarray:
    """Smoothed target: epsilon on the true label, (1 - epsilon) / (L - 1) elsewhere.

    Built as ((eps * L - 1) / (L - 1)) * one_hot + ((1 - eps) / (L - 1)) * ones,
    so epsilon = 1 collapses to one-hot and epsilon = 1/L to the uniform vector.
    """
    if label_count < 2:
        raise ConfigError("smoothing needs at least 2 labels")
    if not 0 < epsilon <= 1:
        raise ConfigError("epsilon must be in (0, 1]")
    if not 0 <= label < label_count:
        raise ConfigError(f"label {label} outside [0, {label_count})")
    peak = (epsilon * label_count - 1.0) / (label_count - 1.0)
    rest = (1.0 - epsilon) / (label_count - 1.0)
    vec = np.full(label_count, rest)
    vec[label] += peak
    return vec


def ac_table(label_count: int, epsilon: float) -> np.ndarray:
    """Row y holds ac_target(y); handy for vectorised per-batch lookup."""
    return np.stack([ac_target(y, label_count, epsilon) for y in range(label_count)])


def mark_misclassified(snap: ModelSnapshot, dataset: Dataset) -> np.ndarray:
    """Boolean mask over the dataset: argmax of the frozen model != true label.

    Argmax ties resolve to the lowest index.
    """
    if snap.model.output_dim != dataset.label_count:
        raise ConfigError(
            f"snapshot emits {snap.model.output_dim} logits for {dataset.label_count} labels"
        )
    preds = forward(snap.model, dataset.features).argmax(axis=1)
    return preds != dataset.labels


def ac_epoch(
    model: Model,
    snap: ModelSnapshot,
    dataset: Dataset,
    cfg: ACConfig,
    hyper: OptimHyper,
    epoch: int,
    rng,
    *,
    batch_size: int = 128,
    base_rows=None,
    velocity=None,
    metrics=None,
):
    """One compensated epoch; returns (model, snapshot of the post-epoch model).

    The misclassification mask is computed once, up front, from ``snap``;
    masked samples use the smoothed target, all others the ``base_rows``
    target (one-hot by default). The learning rate follows the milestone
    schedule at ``epoch``. ``metrics``, if given, receives train_loss,
    train_acc and modified_count (the mask popcount).
    """
    if epoch < cfg.threshold_epoch:
        raise ConfigError(f"compensation starts at epoch {cfg.threshold_epoch}, got {epoch}")
    label_count = dataset.label_count
    if cfg.epsilon * label_count <= 1:
        raise ConfigError("epsilon * label_count must exceed 1 to keep the target's argmax")
    if base_rows is None:
        base_rows = lambda labels: one_hot_rows(labels, label_count)
    if velocity is None:
        velocity = []
    mask = mark_misclassified(snap, dataset)
    smooth = ac_table(label_count, cfg.epsilon)

    def batches():
        for idx in shuffled_batches(dataset.n, batch_size, rng):
            labels = dataset.labels[idx]
            rows = base_rows(labels)
            hit = mask[idx]
            if hit.any():
                rows[hit] = smooth[labels[hit]]
            yield idx, labels, rows

    loss, acc = train_batches(
        model, dataset.features, batches(), hyper, lr_at_epoch(hyper, epoch), velocity
    )
    if metrics is not None:
        metrics.update(
            train_loss=loss, train_acc=acc, modified_count=int(mask.sum())
        )
    return model, snapshot(model, epoch=epoch)
