"""Datasets and samplers.

Covers the CIFAR-10/100 binary archives, synthetic Gaussian blob datasets
for desk-scale runs, a flat binary persistence format, and the two seeded
samplers the training loops use: a two-stage sampler with a uniform prior
over ground-truth labels, and a conventional shuffled-epoch iterator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

# Per-trial RNG substreams. Streams are keyed by (seed, stream, epoch index)
# so runs that share a timeline consume identical draws epoch for epoch.
STREAM_INIT, STREAM_WINDOW, STREAM_POST, STREAM_DRY, STREAM_EVAL, STREAM_ORDER = range(6)

_CIFAR10_TRAIN = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
_CIFAR10_TEST = ("test_batch.bin",)
_CIFAR_PIXELS = 3072


def stream_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, stream, epoch) slot."""
    return np.random.default_rng([int(seed), int(stream), int(index)])


@dataclass
class Dataset:
    """Feature matrix with integer labels in [0, label_count)."""

    features: np.ndarray  # N x D float64
    labels: np.ndarray  # N int64
    label_count: int
    split: str = "train"

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise DataError("features must be N x D and labels a length-N vector")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        if self.label_count < 1:
            raise DataError("label_count must be at least 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.label_count):
            raise DataError(f"labels outside [0, {self.label_count})")
        # Shared read-only across trials.
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def label_indices(self) -> list[np.ndarray]:
        """Sample indices per label, ascending."""
        return [np.flatnonzero(self.labels == c) for c in range(self.label_count)]

    @cached_property
    def label_sizes(self) -> np.ndarray:
        return np.array([len(ix) for ix in self.label_indices], dtype=np.int64)

    @cached_property
    def _label_table(self) -> np.ndarray:
        # Padded index table for vectorised two-stage sampling.
        width = int(self.label_sizes.max()) if self.label_count else 0
        table = np.zeros((self.label_count, max(width, 1)), dtype=np.int64)
        for c, ix in enumerate(self.label_indices):
            table[c, : len(ix)] = ix
        return table


@dataclass(frozen=True)
class BatchPlan:
    """How to draw one run of mini-batches."""

    batch_size: int
    seed: int
    epoch: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(self.epoch)])


def sample_batch(dataset: Dataset, plan: BatchPlan, rng: np.random.Generator | None = None):
    """Draw ``batch_size`` indices with a uniform prior over GT labels.

    Two stages, with replacement: pick a label uniformly among all
    ``label_count`` labels, then a sample uniformly within that label.
    """
    if dataset.n == 0:
        raise DataError("cannot sample from an empty dataset")
    empty = np.flatnonzero(dataset.label_sizes == 0)
    if empty.size:
        raise DataError(f"label {int(empty[0])} has no samples")
    if rng is None:
        rng = plan.rng()
    labels = rng.integers(dataset.label_count, size=plan.batch_size)
    pos = rng.integers(0, dataset.label_sizes[labels])
    return dataset._label_table[labels, pos]


def shuffled_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Conventional epoch: one permutation of [0, n) cut into batches."""
    if n < 1 or batch_size < 1:
        raise ConfigError("need a non-empty dataset and positive batch size")
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def make_blobs(classes: int, per_class: int, dim: int, sep: float, seed: int):
    """Gaussian blobs around well-separated class centers.

    Centers sit at ``sep`` times unit direction vectors from a seeded random
    frame (orthonormal when classes <= dim), with unit-variance isotropic
    noise. Returns a stratified 80/20 (train, test) split.
    """
    if classes < 2:
        raise ConfigError("need at least 2 classes")
    if dim < 1:
        raise ConfigError("dim must be at least 1")
    if sep <= 0:
        raise ConfigError("sep must be positive")
    if per_class < 5:
        raise ConfigError("need at least 5 samples per class for an 80/20 split")
    rng = np.random.default_rng(seed)
    if classes <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
        directions = q.T
    else:
        g = rng.standard_normal((classes, dim))
        directions = g / np.linalg.norm(g, axis=1, keepdims=True)
    centers = sep * directions
    train_per_class = (4 * per_class) // 5
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(classes):
        pts = centers[c] + rng.standard_normal((per_class, dim))
        train_x.append(pts[:train_per_class])
        test_x.append(pts[train_per_class:])
        train_y.append(np.full(train_per_class, c))
        test_y.append(np.full(per_class - train_per_class, c))
    train = Dataset(np.vstack(train_x), np.concatenate(train_y), classes, split="train")
    test = Dataset(np.vstack(test_x), np.concatenate(test_y), classes, split="test")
    return train, test


def _read_cifar_file(path: Path, label_bytes: int, label_pos: int, label_limit: int):
    if not path.is_file():
        raise DataError(f"missing data file: {path}")
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    record = label_bytes + _CIFAR_PIXELS
    if raw.size == 0 or raw.size % record != 0:
        raise DataError(f"{path}: size {raw.size} is not a positive multiple of {record}")
    records = raw.reshape(-1, record)
    labels = records[:, label_pos].astype(np.int64)
    if (labels >= label_limit).any():
        bad = int(labels.max())
        raise DataError(f"{path}: corrupt record with label byte {bad} >= {label_limit}")
    features = records[:, label_bytes:].astype(np.float64) / 255.0
    return features, labels


def _load_cifar(path, train_files, test_files, label_bytes, label_pos, label_count):
    root = Path(path)
    train_parts = [_read_cifar_file(root / f, label_bytes, label_pos, label_count) for f in train_files]
    test_parts = [_read_cifar_file(root / f, label_bytes, label_pos, label_count) for f in test_files]
    train = Dataset(
        np.vstack([p[0] for p in train_parts]),
        np.concatenate([p[1] for p in train_parts]),
        label_count,
        split="train",
    )
    test = Dataset(
        np.vstack([p[0] for p in test_parts]),
        np.concatenate([p[1] for p in test_parts]),
        label_count,
        split="test",
    )
    return train, test


def load_cifar10(path):
    """Load the CIFAR-10 binary archive from a directory.

    Each record is 1 label byte followed by 3072 channel-planar pixel bytes;
    pixels are scaled to [0, 1].
    """
    return _load_cifar(path, _CIFAR10_TRAIN, _CIFAR10_TEST, 1, 0, 10)


def load_cifar100(path):
    """Load CIFAR-100 (train.bin/test.bin; coarse then fine label byte, fine used)."""
    return _load_cifar(path, ("train.bin",), ("test.bin",), 2, 1, 100)


def save_dataset(path, features, labels, label_count: int):
    """Persist arrays as flat binary: int64 LE header (N, D, L), labels, float64 rows."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise DataError("features must be N x D with N labels")
    with open(path, "wb") as fh:
        header = np.array([features.shape[0], features.shape[1], label_count], dtype="<i8")
        fh.write(header.tobytes())
        fh.write(labels.astype("<i8").tobytes())
        fh.write(features.astype("<f8").tobytes())


def load_dataset(path, split: str = "train") -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < 24:
        raise DataError(f"{path}: too short for a header")
    n, d, label_count = (int(v) for v in np.frombuffer(raw[:24], dtype="<i8"))
    expect = 24 + 8 * n + 8 * n * d
    if n < 0 or d < 0 or label_count < 1 or len(raw) != expect:
        raise DataError(f"{path}: size {len(raw)} does not match header ({n}, {d}, {label_count})")
    labels = np.frombuffer(raw, dtype="<i8", count=n, offset=24)
    features = np.frombuffer(raw, dtype="<f8", count=n * d, offset=24 + 8 * n).reshape(n, d)
    return Dataset(features.copy(), labels.copy(), label_count, split=split)
