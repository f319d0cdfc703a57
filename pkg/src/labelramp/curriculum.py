"""Staged label introduction.

The label set is split into a revealed part and a hidden part. Hidden
samples all train against a single pseudo-label and act as negatives;
mini-batches are rebalanced so revealed and hidden portions are the same
size. Every few epochs more labels move from hidden to revealed until the
whole label set is in play.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, BatchPlan, STREAM_WINDOW, sample_batch, stream_rng
from .errors import ConfigError
from .nncore import Model, OptimHyper, one_hot_rows, train_batches

ORDER_POLICIES = ("ascending", "random")


@dataclass(frozen=True)
class Schedule:
    """Reveal timetable for the staged window.

    ``initial`` labels start revealed (config key ``b``), ``step`` more are
    revealed per interval (``m``), each interval lasts
    ``epochs_per_interval`` epochs (``E``) at learning rate ``lr``
    (``interval_lr``).
    """

    initial: int
    step: int
    epochs_per_interval: int
    lr: float

    def __post_init__(self):
        if self.initial < 1:
            raise ConfigError("schedule needs at least one initially revealed label")
        if self.step < 1:
            raise ConfigError("labels per reveal must be at least 1")
        if self.epochs_per_interval < 1:
            raise ConfigError("epochs per interval must be at least 1")
        if self.lr <= 0:
            raise ConfigError("interval learning rate must be positive")


@dataclass(frozen=True)
class Partition:
    """Revealed/hidden split of the label set.

    ``order`` lists all labels in reveal order; the first
    ``revealed_count`` of them are revealed. ``pseudo_label`` is the target
    every hidden sample trains against (the last label index, so the
    classifier head keeps its width).
    """

    order: tuple[int, ...]
    revealed_count: int
    pseudo_label: int

    @property
    def label_count(self) -> int:
        return len(self.order)

    @property
    def revealed(self) -> tuple[int, ...]:
        return self.order[: self.revealed_count]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.order[self.revealed_count :]

    def revealed_mask(self) -> np.ndarray:
        mask = np.zeros(self.label_count, dtype=bool)
        mask[list(self.revealed)] = True
        return mask


def init_partition(
    label_count: int,
    schedule: Schedule,
    policy: str = "ascending",
    seed: int | None = None,
) -> Partition:
    """Partition with the first ``schedule.initial`` labels revealed under the policy order."""
    if schedule.initial > label_count:
        raise ConfigError(
            f"cannot start with {schedule.initial} revealed labels out of {label_count}"
        )
    if policy not in ORDER_POLICIES:
        raise ConfigError(f"unknown order policy {policy!r}")
    if policy == "random":
        if seed is None:
            raise ConfigError("random order policy needs a seed")
        order = tuple(int(c) for c in np.random.default_rng(seed).permutation(label_count))
    else:
        order = tuple(range(label_count))
    return Partition(order, schedule.initial, label_count - 1)


def reveal(partition: Partition, step: int) -> Partition:
    """Move the next ``step`` labels (clamped) from hidden to revealed."""
    nxt = min(partition.revealed_count + max(step, 0), partition.label_count)
    return replace(partition, revealed_count=nxt)


def effective_label(label: int, partition: Partition) -> int:
    """The training target for a sample: its own label if revealed, else the pseudo-label."""
    return int(label) if label in partition.revealed else partition.pseudo_label


def effective_labels(labels, partition: Partition) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    return np.where(partition.revealed_mask()[labels], labels, partition.pseudo_label)


def interval_count(label_count: int, schedule: Schedule) -> int:
    """Intervals in the staged window: one per reveal plus a final all-revealed
    interval; zero when nothing is hidden to begin with."""
    hidden = label_count - schedule.initial
    if hidden <= 0:
        return 0
    return math.ceil(hidden / schedule.step) + 1


def window_epochs(label_count: int, schedule: Schedule) -> int:
    return interval_count(label_count, schedule) * schedule.epochs_per_interval


def balance_batch(raw_indices, dataset: Dataset, partition: Partition, rng):
    """Equalise the hidden portion of a raw batch against the revealed portion.

    With n_s revealed-label samples in the raw draw, the hidden portion is
    uniformly subsampled (if larger) or kept and uniformly duplicated (if
    smaller) to exactly n_s, giving a batch of 2 * n_s entries. Returns
    (indices, effective integer targets). Degenerate draws: with no revealed
    samples the raw batch is returned as-is with pseudo-label targets; with
    no hidden samples in the draw (but a non-empty hidden set) the hidden
    half is drawn from the hidden pool of the whole dataset.
    """
    raw = np.asarray(raw_indices, dtype=np.int64)
    labels = dataset.labels[raw]
    if not partition.hidden:
        return raw, labels.copy()
    revealed = partition.revealed_mask()[labels]
    s_idx = raw[revealed]
    u_idx = raw[~revealed]
    n_s = len(s_idx)
    if n_s == 0:
        return raw, np.full(len(raw), partition.pseudo_label, dtype=np.int64)
    if len(u_idx) == 0:
        pool = np.concatenate([dataset.label_indices[c] for c in partition.hidden])
        if len(pool) == 0:
            # hidden classes have no samples in this dataset; nothing to borrow
            return raw, labels.copy()
        u_part = rng.choice(pool, size=n_s, replace=True)
    elif len(u_idx) > n_s:
        u_part = rng.choice(u_idx, size=n_s, replace=False)
    elif len(u_idx) < n_s:
        extra = rng.choice(u_idx, size=n_s - len(u_idx), replace=True)
        u_part = np.concatenate([u_idx, extra])
    else:
        u_part = u_idx
    idx = np.concatenate([s_idx, u_part])
    targets = np.concatenate(
        [labels[revealed], np.full(len(u_part), partition.pseudo_label, dtype=np.int64)]
    )
    return idx, targets


def run_il(
    model: Model,
    dataset: Dataset,
    schedule: Schedule,
    hyper: OptimHyper,
    seed: int,
    *,
    batch_size: int = 128,
    policy: str = "ascending",
    order_seed: int | None = None,
    target_rows=None,
    balancer=None,
    velocity=None,
    epoch_hook=None,
    batch_hook=None,
):
    """Train through the staged window and return (model, epochs consumed).

    Each interval runs ``schedule.epochs_per_interval`` epochs at
    ``schedule.lr``; after every interval but the last, ``schedule.step``
    labels are revealed, so the final interval trains with the full label
    set. Each epoch iterates ceil(N / batch_size) balanced batches drawn
    with the uniform-label-prior sampler.

    ``epoch_hook(epoch_index, partition, stats)`` fires per epoch with
    train_loss / train_acc / pseudo_targets; ``batch_hook(raw, idx,
    targets, partition)`` fires per balanced batch.
    """
    label_count = dataset.label_count
    if model.output_dim != label_count:
        raise ConfigError(f"model emits {model.output_dim} logits for {label_count} labels")
    partition = init_partition(label_count, schedule, policy, seed=order_seed)
    if balancer is None:
        balancer = balance_batch
    if target_rows is None:
        target_rows = lambda labels: one_hot_rows(labels, label_count)
    if velocity is None:
        velocity = []
    plan = BatchPlan(batch_size, seed)
    steps = math.ceil(dataset.n / batch_size)
    epochs_done = 0
    intervals = interval_count(label_count, schedule)
    for interval in range(intervals):
        for _ in range(schedule.epochs_per_interval):
            rng = stream_rng(seed, STREAM_WINDOW, epochs_done)
            hidden_mask = ~partition.revealed_mask()
            pseudo_targets = 0

            def batches():
                nonlocal pseudo_targets
                for _ in range(steps):
                    raw = sample_batch(dataset, plan, rng)
                    idx, targets = balancer(raw, dataset, partition, rng)
                    pseudo_targets += int(hidden_mask[dataset.labels[idx]].sum())
                    if batch_hook is not None:
                        batch_hook(raw, idx, targets, partition)
                    yield idx, targets, target_rows(targets)

            loss, acc = train_batches(
                model, dataset.features, batches(), hyper, schedule.lr, velocity
            )
            if epoch_hook is not None:
                epoch_hook(
                    epochs_done,
                    partition,
                    {"train_loss": loss, "train_acc": acc, "pseudo_targets": pseudo_targets},
                )
            epochs_done += 1
        if interval < intervals - 1:
            partition = reveal(partition, schedule.step)
    return model, epochs_done
