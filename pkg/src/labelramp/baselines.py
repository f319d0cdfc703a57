"""Comparison training variants.

``batch`` is conventional shuffled-epoch SGD; on top of it the variants add
label smoothing, batch-size mimicking (``dbs``), single-class negative
balancing (``ra``), the staged label window alone (``only_il``), the
compensation phase alone (``only_ac``), and their combinations (``il_ac``,
``ls_il_ac``). All variants share the post-window epoch budget and, epoch
for epoch, the same derived RNG streams, so degenerate settings reproduce
``batch`` exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .compensation import ac_epoch
from .config import (
    AC_VARIANTS,
    IL_VARIANTS,
    LS_VARIANTS,
    VARIANTS,
    WINDOW_VARIANTS,
    ExperimentConfig,
)
from .curriculum import (
    Partition,
    balance_batch,
    init_partition,
    interval_count,
    reveal,
    run_il,
    window_epochs,
)
from .data import (
    BatchPlan,
    Dataset,
    STREAM_DRY,
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_ORDER,
    STREAM_POST,
    STREAM_WINDOW,
    sample_batch,
    shuffled_batches,
    stream_rng,
)
from .errors import ConfigError
from .evaluation import accuracy, cluster_accuracy, extract_features, kmeans, linear_probe
from .nncore import init_model, lr_at_epoch, one_hot_rows, snapshot, train_batches
from .reporting import EpochRow, TrialReport


def ls_target(label: int, label_count: int, alpha: float) -> np.ndarray:
    """Classic smoothed target: (1 - alpha) * one_hot + alpha / L everywhere."""
    if not 0 <= alpha < 1:
        raise ConfigError("alpha must be in [0, 1)")
    if not 0 <= label < label_count:
        raise ConfigError(f"label {label} outside [0, {label_count})")
    vec = np.full(label_count, alpha / label_count)
    vec[label] += 1.0 - alpha
    return vec


def ls_table(label_count: int, alpha: float) -> np.ndarray:
    return np.stack([ls_target(y, label_count, alpha) for y in range(label_count)])


def dbs_batch(raw_indices, size_pool, rng) -> np.ndarray:
    """Resize a raw batch to a size drawn from ``size_pool``.

    Growing duplicates uniformly chosen raw entries; shrinking keeps a
    uniform subsample. Targets stay the samples' own GT labels, so no
    pseudo-label is ever emitted.
    """
    raw = np.asarray(raw_indices, dtype=np.int64)
    if len(raw) == 0:
        raise ConfigError("raw batch is empty")
    target = int(rng.choice(np.asarray(size_pool)))
    if target == len(raw):
        return raw
    if target > len(raw):
        extra = rng.choice(raw, size=target - len(raw), replace=True)
        return np.concatenate([raw, extra])
    return rng.choice(raw, size=target, replace=False)


def ra_balance(raw_indices, dataset: Dataset, partition: Partition, rng):
    """Like ``balance_batch`` but the hidden half comes from one hidden class.

    The donor class is chosen uniformly among hidden classes present in the
    raw draw; with none present, it is chosen uniformly among all hidden
    classes and its samples drawn from the whole dataset.
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
    if len(u_idx):
        u_labels = labels[~revealed]
        donor = int(rng.choice(np.unique(u_labels)))
        pool = u_idx[u_labels == donor]
        if len(pool) > n_s:
            u_part = rng.choice(pool, size=n_s, replace=False)
        elif len(pool) < n_s:
            extra = rng.choice(pool, size=n_s - len(pool), replace=True)
            u_part = np.concatenate([pool, extra])
        else:
            u_part = pool
    else:
        candidates = [c for c in partition.hidden if len(dataset.label_indices[c])]
        if not candidates:
            # hidden classes have no samples in this dataset; nothing to borrow
            return raw, labels.copy()
        donor = int(rng.choice(np.asarray(candidates)))
        u_part = rng.choice(dataset.label_indices[donor], size=n_s, replace=True)
    idx = np.concatenate([s_idx, u_part])
    targets = np.concatenate(
        [labels[revealed], np.full(len(u_part), partition.pseudo_label, dtype=np.int64)]
    )
    return idx, targets


def dbs_size_pools(dataset: Dataset, schedule, batch_size: int, seed: int,
                   policy: str = "ascending", order_seed=None) -> list[np.ndarray]:
    """Balanced-batch sizes per window epoch, from a dry (no training) pass.

    Replays the staged window's partitions and raw draws on separate RNG
    streams and records the size every balanced batch would have had.
    """
    label_count = dataset.label_count
    intervals = interval_count(label_count, schedule)
    if intervals == 0:
        return []
    partition = init_partition(label_count, schedule, policy, seed=order_seed)
    plan = BatchPlan(batch_size, seed)
    steps = math.ceil(dataset.n / batch_size)
    pools = []
    epoch = 0
    for interval in range(intervals):
        for _ in range(schedule.epochs_per_interval):
            rng = stream_rng(seed, STREAM_DRY, epoch)
            sizes = []
            for _ in range(steps):
                raw = sample_batch(dataset, plan, rng)
                idx, _ = balance_batch(raw, dataset, partition, rng)
                sizes.append(len(idx))
            pools.append(np.asarray(sizes, dtype=np.int64))
            epoch += 1
        if interval < intervals - 1:
            partition = reveal(partition, schedule.step)
    return pools


def run_variant(kind: str, train: Dataset, test: Dataset, config: ExperimentConfig,
                seed: int, observer=None) -> TrialReport:
    """Run one seeded trial of a variant and collect its per-epoch rows.

    Phase order is window (staged labels, when the variant has one), then
    the standard schedule, then compensation from ``threshold_T`` on (for
    variants that compensate). The milestone learning-rate schedule and the
    per-epoch RNG streams are indexed on the post-window timeline.
    """
    if kind not in VARIANTS:
        raise ConfigError(f"unknown variant {kind!r}; pick one of {VARIANTS}")
    label_count = train.label_count
    hyper = config.optim_hyper()
    schedule = config.schedule(label_count)
    model = init_model([train.dim, *config.hidden, label_count], stream_rng(seed, STREAM_INIT))
    velocity: list = []
    rows: list[EpochRow] = []
    order_seed = [seed, STREAM_ORDER] if config.order_policy == "random" else None

    if kind in LS_VARIANTS:
        table = ls_table(label_count, config.ls_alpha)
        base_rows = lambda labels: table[labels]
    else:
        base_rows = lambda labels: one_hot_rows(labels, label_count)

    window = window_epochs(label_count, schedule) if kind in WINDOW_VARIANTS else 0
    total_rows = window + config.total_epochs
    in_ac_family = kind in AC_VARIANTS

    def finish_epoch(phase, revealed, lr, stats, modified, snapshot_used=None, post_epoch=None):
        here = len(rows)
        test_acc = accuracy(model, test)
        probe_acc = cluster_acc = None
        if config.probe_every and (here % config.probe_every == 0 or here == total_rows - 1):
            feats_train = extract_features(model, train)
            feats_test = extract_features(model, test)
            probe_acc = linear_probe(
                feats_train, train.labels, feats_test, test.labels,
                [seed, STREAM_EVAL, here, 0],
            )
            clusters = kmeans(feats_test, label_count, [seed, STREAM_EVAL, here, 1])
            cluster_acc = cluster_accuracy(clusters, test.labels, label_count)
        rows.append(
            EpochRow(
                epoch=here,
                phase=phase,
                revealed_labels=revealed,
                lr=lr,
                train_loss=stats["train_loss"],
                train_acc=stats["train_acc"],
                test_acc=test_acc,
                ac_modified_count=modified,
                probe_acc=probe_acc,
                cluster_acc=cluster_acc,
            )
        )
        if observer is not None:
            observer(
                {
                    "variant": kind,
                    "phase": phase,
                    "global_epoch": here,
                    "post_epoch": post_epoch,
                    "revealed": revealed,
                    "modified_count": modified,
                    "snapshot": snapshot_used,
                    "pseudo_targets": stats.get("pseudo_targets"),
                }
            )

    # ---- staged window ----
    if window and kind == "dbs":
        pools = dbs_size_pools(train, schedule, config.batch_size, seed,
                               config.order_policy, order_seed)
        plan = BatchPlan(config.batch_size, seed)
        steps = math.ceil(train.n / config.batch_size)
        for j in range(window):
            rng = stream_rng(seed, STREAM_WINDOW, j)

            def batches():
                for _ in range(steps):
                    idx = dbs_batch(sample_batch(train, plan, rng), pools[j], rng)
                    labels = train.labels[idx]
                    yield idx, labels, base_rows(labels)

            loss, acc = train_batches(model, train.features, batches(), hyper, schedule.lr, velocity)
            finish_epoch(
                "IL", label_count, schedule.lr,
                {"train_loss": loss, "train_acc": acc, "pseudo_targets": 0},
                0 if in_ac_family else None,
            )
    elif window:
        balancer = ra_balance if kind == "ra" else balance_batch

        def il_hook(_epoch_index, partition, stats):
            finish_epoch(
                "IL", len(partition.revealed), schedule.lr, stats,
                0 if in_ac_family else None,
            )

        run_il(
            model, train, schedule, hyper, seed,
            batch_size=config.batch_size,
            policy=config.order_policy,
            order_seed=order_seed,
            target_rows=base_rows,
            balancer=balancer,
            velocity=velocity,
            epoch_hook=il_hook,
        )

    # ---- standard schedule, then compensation ----
    acfg = config.ac_config() if in_ac_family else None
    snap = snapshot(model, epoch=-1) if in_ac_family and config.threshold_T == 0 else None
    for t in range(config.total_epochs):
        lr = lr_at_epoch(hyper, t)
        rng = stream_rng(seed, STREAM_POST, t)
        if in_ac_family and t >= config.threshold_T:
            used = snap
            stats: dict = {}
            model, snap = ac_epoch(
                model, used, train, acfg, hyper, t, rng,
                batch_size=config.batch_size,
                base_rows=base_rows,
                velocity=velocity,
                metrics=stats,
            )
            finish_epoch("AC", label_count, lr, stats, stats["modified_count"],
                         snapshot_used=used, post_epoch=t)
        else:
            def batches():
                for idx in shuffled_batches(train.n, config.batch_size, rng):
                    labels = train.labels[idx]
                    yield idx, labels, base_rows(labels)

            loss, acc = train_batches(model, train.features, batches(), hyper, lr, velocity)
            if in_ac_family and t == config.threshold_T - 1:
                snap = snapshot(model, epoch=t)
            finish_epoch("standard", label_count, lr,
                         {"train_loss": loss, "train_acc": acc},
                         0 if in_ac_family else None, post_epoch=t)
    return TrialReport(kind, seed, rows, window)
