"""Model and representation evaluation.

Classification accuracy, penultimate-layer feature extraction, a linear
hinge probe trained on frozen features, Lloyd's k-means with seeded
k-means++ initialisation, minimum-cost assignment for matching clusters to
labels, and the resulting cluster accuracy.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import Dataset, save_dataset, shuffled_batches
from .errors import ConfigError, NumericError, ShapeError
from .nncore import Model, _check_inputs, _forward_cached, forward


def accuracy(model: Model, dataset: Dataset) -> float:
    """Percent of samples whose argmax logit matches the label (ties -> lowest index)."""
    preds = forward(model, dataset.features).argmax(axis=1)
    return 100.0 * int((preds == dataset.labels).sum()) / dataset.n


def extract_features(model: Model, dataset: Dataset) -> np.ndarray:
    """Activations after the penultimate layer, before the final linear map."""
    if len(model.layers) < 2:
        raise ShapeError("feature extraction needs a model with at least two layers")
    x = _check_inputs(model, dataset.features)
    return _forward_cached(model, x)[1][-2]


def save_features(path, features, labels, label_count: int | None = None):
    """Persist a feature matrix in the flat binary dataset format."""
    labels = np.asarray(labels, dtype=np.int64)
    if label_count is None:
        label_count = int(labels.max()) + 1 if labels.size else 1
    save_dataset(path, features, labels, label_count)


def linear_probe(
    train_features,
    train_labels,
    test_features,
    test_labels,
    seed,
    *,
    epochs: int = 50,
    lr: float = 0.01,
    weight_decay: float = 1e-4,
    batch_size: int = 128,
) -> float:
    """Test accuracy of a linear multiclass-hinge classifier on frozen features.

    Features are standardised by train statistics; the classifier starts at
    zero and runs plain SGD with the fixed recipe above.
    """
    xtr = np.asarray(train_features, dtype=np.float64)
    xte = np.asarray(test_features, dtype=np.float64)
    ytr = np.asarray(train_labels, dtype=np.int64)
    yte = np.asarray(test_labels, dtype=np.int64)
    if xtr.ndim != 2 or xte.ndim != 2 or xtr.shape[1] != xte.shape[1]:
        raise ShapeError("train/test features must be 2-D with matching width")
    if len(xtr) != len(ytr) or len(xte) != len(yte):
        raise ShapeError("feature/label counts do not match")
    classes = int(max(ytr.max(), yte.max())) + 1
    if np.unique(ytr).size < 2:
        raise ConfigError("probe needs at least two classes in the training labels")

    mean = xtr.mean(axis=0)
    std = xtr.std(axis=0)
    std[std == 0] = 1.0
    xtr = (xtr - mean) / std
    xte = (xte - mean) / std

    rng = np.random.default_rng(seed)
    w = np.zeros((xtr.shape[1], classes))
    b = np.zeros(classes)
    for _ in range(epochs):
        for idx in shuffled_batches(len(xtr), batch_size, rng):
            x, y = xtr[idx], ytr[idx]
            rows = np.arange(len(idx))
            scores = x @ w + b
            rival = scores.copy()
            rival[rows, y] = -np.inf
            top = rival.argmax(axis=1)
            violated = 1.0 + scores[rows, top] - scores[rows, y] > 0
            gscore = np.zeros_like(scores)
            gscore[rows[violated], top[violated]] = 1.0
            gscore[rows[violated], y[violated]] -= 1.0
            gscore /= len(idx)
            w -= lr * (x.T @ gscore + weight_decay * w)
            b -= lr * gscore.sum(axis=0)
    preds = (xte @ w + b).argmax(axis=1)
    return 100.0 * int((preds == yte).sum()) / len(yte)


def _pairwise_sq(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * x @ centers.T
    )
    return np.maximum(d2, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    chosen = {first}
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining mass is on already-chosen points; take the first fresh index
            pick = next(i for i in range(n) if i not in chosen)
        chosen.add(pick)
        centers[j] = x[pick]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(features, k: int, seed, max_iters: int = 100, trace=None) -> np.ndarray:
    """Lloyd's algorithm with seeded k-means++ init; returns cluster labels.

    Stops at an assignment fixpoint or after ``max_iters``. Clusters that
    empty out are reseeded to the point farthest from its assigned center.
    ``trace``, if given, collects the objective after each assignment step.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("features must be 2-D")
    if not 1 <= k <= len(x):
        raise ConfigError(f"k must be in [1, {len(x)}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    assign = None
    for _ in range(max_iters):
        d2 = _pairwise_sq(x, centers)
        new_assign = d2.argmin(axis=1)
        if trace is not None:
            trace.append(float(d2[np.arange(len(x)), new_assign].sum()))
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                farthest = int(d2[np.arange(len(x)), assign].argmax())
                centers[c] = x[farthest]
    return assign


def hungarian(cost) -> np.ndarray:
    """Minimum-cost permutation for a square cost matrix (row -> column)."""
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"cost matrix must be square, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise NumericError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(c)
    perm = np.empty(c.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def cluster_accuracy(cluster_labels, true_labels, k: int) -> float:
    """Percent of samples explained by the best cluster-to-label matching."""
    clusters = np.asarray(cluster_labels, dtype=np.int64)
    truth = np.asarray(true_labels, dtype=np.int64)
    if clusters.shape != truth.shape:
        raise ShapeError("cluster and label vectors must have the same length")
    if clusters.size == 0:
        raise ShapeError("need at least one sample")
    if clusters.min() < 0 or clusters.max() >= k or truth.min() < 0 or truth.max() >= k:
        raise ConfigError(f"labels must lie in [0, {k})")
    contingency = np.zeros((k, k), dtype=np.int64)
    np.add.at(contingency, (clusters, truth), 1)
    perm = hungarian(-contingency.astype(np.float64))
    matched = int(contingency[np.arange(k), perm].sum())
    return 100.0 * matched / clusters.size
