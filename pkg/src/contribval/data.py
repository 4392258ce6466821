"""Datasets and the non-IID client split.

Splitting functions work on label vectors and return index arrays into the
source dataset, so disjointness and coverage can be checked directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .streams import Purpose, stream


class PartitionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (examples, dims) and match the labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")

    def __len__(self) -> int:
        return self.labels.size

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class PartitionSpec:
    n_clients: int
    dirichlet_alpha: float
    imbalance_factor: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be > 0")
        if not 0 < self.imbalance_factor <= 1:
            raise ValueError("imbalance_factor must lie in (0, 1]")


def make_blobs(
    n_samples: int = 6000,
    n_classes: int = 5,
    n_features: int = 20,
    class_sep: float = 0.4,
    seed: int = 0,
) -> Dataset:
    """Balanced Gaussian blobs with unit noise, standardized per feature.

    Class centres are drawn from N(0, class_sep^2 I); smaller ``class_sep``
    means more overlap.
    """
    rng = np.random.default_rng([int(seed), 0xB10B])
    centres = rng.normal(0.0, class_sep, (n_classes, n_features))
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    X = centres[labels] + rng.normal(size=(n_samples, n_features))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return Dataset(X, labels.astype(np.int64), n_classes)


def longtail_transform(class_counts, imb: float) -> np.ndarray:
    """Per-class sizes after an exponential long-tail: n_max * imb**(c/(C-1)).

    Class 0 keeps the most; each size is capped by what the class has.
    """
    if not 0 < imb <= 1:
        raise ValueError(f"imbalance factor must lie in (0, 1], got {imb}")
    counts = np.asarray(class_counts, dtype=np.int64)
    C = counts.size
    n_max = int(counts.max())
    if C == 1:
        return counts.copy()
    target = np.array([math.floor(n_max * imb ** (c / (C - 1)) + 0.5) for c in range(C)])
    return np.minimum(counts, target)


def longtail_subsample(labels, n_classes: int, imb: float, rng: np.random.Generator) -> np.ndarray:
    """Indices kept by the long-tail transform, drawn uniformly per class."""
    labels = np.asarray(labels)
    sizes = longtail_transform(np.bincount(labels, minlength=n_classes), imb)
    keep = [rng.choice(np.flatnonzero(labels == c), size=sizes[c], replace=False) for c in range(n_classes)]
    return np.sort(np.concatenate(keep)).astype(np.int64)


def _largest_remainder(shares: np.ndarray, total: int) -> np.ndarray:
    raw = shares * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def split_eval_set(labels, fraction: float = 0.01, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Hold out ``round(fraction * N)`` examples, stratified by class.

    Returns ``(train_indices, eval_indices)``.  When a class cannot supply its
    proportional share the hold-out is drawn globally instead.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(0) if rng is None else rng
    labels = np.asarray(labels)
    N = labels.size
    size = math.floor(fraction * N + 0.5)
    classes, counts = np.unique(labels, return_counts=True)
    alloc = _largest_remainder(counts / N, size)
    if np.any(alloc > counts):
        held = rng.choice(N, size=size, replace=False)
    else:
        held = np.concatenate([
            rng.choice(np.flatnonzero(labels == c), size=a, replace=False)
            for c, a in zip(classes, alloc)
        ])
    held = np.sort(held).astype(np.int64)
    train = np.setdiff1d(np.arange(N), held)
    return train, held


def dirichlet_partition(
    labels, n_clients: int, alpha: float, rng: np.random.Generator, *, max_redraws: int = 100
) -> list[np.ndarray]:
    """Split example indices across clients with Dirichlet(alpha) class shares.

    For every class a share vector over clients is drawn from a symmetric
    Dirichlet and the class's examples are handed out by largest-remainder
    rounding.  Draws that leave a client empty are redrawn up to
    ``max_redraws`` times; if every draw leaves someone empty, the draw with
    the fewest empty clients is kept and each empty client receives one
    example from the currently largest shard.

    Raises:
        PartitionError: if there are fewer examples than clients.
    """
    labels = np.asarray(labels)
    if n_clients < 1:
        raise PartitionError("n_clients must be >= 1")
    if labels.size < n_clients:
        raise PartitionError(f"{labels.size} examples cannot cover {n_clients} clients")
    classes = np.unique(labels)
    pools = {c: rng.permutation(np.flatnonzero(labels == c)) for c in classes}

    best = None
    for _ in range(max_redraws + 1):
        shards: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
        for c in classes:
            shares = rng.dirichlet(np.full(n_clients, alpha))
            counts = _largest_remainder(shares, pools[c].size)
            for client, chunk in enumerate(np.split(pools[c], np.cumsum(counts)[:-1])):
                shards[client].append(chunk)
        merged = [np.concatenate(s) for s in shards]
        empty = sum(m.size == 0 for m in merged)
        if best is None or empty < best[0]:
            best = (empty, merged)
        if empty == 0:
            break

    merged = best[1]
    for client in range(n_clients):
        if merged[client].size == 0:
            donor = max(range(n_clients), key=lambda i: (merged[i].size, -i))
            merged[client] = merged[donor][-1:]
            merged[donor] = merged[donor][:-1]
    return [np.sort(m).astype(np.int64) for m in merged]


def partition_dataset(dataset: Dataset, spec: PartitionSpec) -> list[np.ndarray]:
    """Long-tail subsample, then Dirichlet split; shards index into ``dataset``."""
    keep = longtail_subsample(
        dataset.labels, dataset.n_classes, spec.imbalance_factor, stream(spec.seed, Purpose.PARTITION, 1)
    )
    shards = dirichlet_partition(
        dataset.labels[keep], spec.n_clients, spec.dirichlet_alpha, stream(spec.seed, Purpose.PARTITION, 2)
    )
    return [keep[s] for s in shards]


def label_entropy(labels, n_classes: int) -> float:
    counts = np.bincount(np.asarray(labels), minlength=n_classes).astype(float)
    if counts.sum() == 0:
        return 0.0
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())
