"""Synthetic classification data, Dirichlet partitioning, and holdout splits.

The simulator runs on Gaussian-blob classification data: one isotropic
unit-covariance cloud per class, with class means drawn once from the data
seed and scaled by ``class_separation``.  Larger separation means easier
classification.  Client heterogeneity comes from a per-class symmetric
Dirichlet allocation: small ``beta`` concentrates each class on a few
clients, large ``beta`` approaches an IID split.

All operations are pure functions of their seed arguments and are
bit-reproducible across runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """A labelled design matrix. Features are float64, labels int64 in [0, C)."""

    features: np.ndarray  # shape (n, num_features)
    labels: np.ndarray  # shape (n,)
    num_classes: int

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be 1-d and aligned with features")
        if len(self.labels) == 0:
            raise ValueError("dataset must be non-empty")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PartitionConfig:
    """Dirichlet partition knobs. beta > 0 is the concentration parameter."""

    beta: float
    num_clients: int
    seed: int

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")


@dataclass(frozen=True)
class Partition:
    """Disjoint client index sets covering the partitioned dataset."""

    assignments: tuple[np.ndarray, ...]  # one sorted int64 index array per client

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    def sizes(self) -> list[int]:
        return [len(a) for a in self.assignments]


def generate_synthetic(
    num_classes: int,
    num_features: int,
    samples_per_class: int,
    class_separation: float,
    seed: int,
) -> Dataset:
    """Sample a balanced Gaussian-blob dataset.

    Class means are ``class_separation`` times independent standard-normal
    draws, so expected pairwise mean distance grows linearly with the
    separation knob; sample noise has unit covariance.
    """
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    if num_features < 1:
        raise ValueError("num_features must be >= 1")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be >= 1")
    if not class_separation >= 0:
        raise ValueError("class_separation must be >= 0")

    rng = np.random.default_rng(seed)
    means = class_separation * rng.standard_normal((num_classes, num_features))
    blocks = []
    labels = []
    for c in range(num_classes):
        blocks.append(means[c] + rng.standard_normal((samples_per_class, num_features)))
        labels.append(np.full(samples_per_class, c, dtype=np.int64))
    return Dataset(
        features=np.concatenate(blocks, axis=0),
        labels=np.concatenate(labels),
        num_classes=num_classes,
    )


def subset(ds: Dataset, indices: np.ndarray) -> Dataset:
    """Materialise the rows of ``ds`` selected by ``indices``."""
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(ds.features[idx].copy(), ds.labels[idx].copy(), ds.num_classes)


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Apportion ``total`` units proportionally to non-negative ``weights``.

    Floors the exact quotas, then hands the leftover units to the largest
    fractional remainders (ties to the lowest index).  The result always sums
    to ``total`` exactly, with each count within one unit of its exact quota.
    """
    w = np.asarray(weights, dtype=np.float64)
    if total < 0:
        raise ValueError("total must be >= 0")
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("weights must be a non-empty 1-d array")
    if w.min() < 0:
        raise ValueError("weights must be non-negative")
    s = w.sum()
    quotas = np.full(len(w), total / len(w)) if s == 0 else w * (total / s)
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # argsort is stable, so equal remainders resolve to the lowest index.
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(ds: Dataset, cfg: PartitionConfig) -> Partition:
    """Split ``ds`` across clients with per-class Dirichlet proportions.

    For each class, proportions p ~ Dirichlet(beta * 1) decide how many of
    that class's samples each client receives (largest-remainder rounding).
    Clients left empty are repaired by taking one sample from the currently
    largest client, so every client ends up with at least one sample.
    """
    n = len(ds)
    if cfg.num_clients > n:
        raise ValueError(
            f"cannot give {cfg.num_clients} clients at least one of {n} samples"
        )
    rng = np.random.default_rng(cfg.seed)
    owned: list[list[int]] = [[] for _ in range(cfg.num_clients)]
    for c in range(ds.num_classes):
        class_idx = np.flatnonzero(ds.labels == c)
        if len(class_idx) == 0:
            continue
        class_idx = rng.permutation(class_idx)
        props = rng.dirichlet(np.full(cfg.num_clients, cfg.beta))
        counts = largest_remainder(props, len(class_idx))
        stop = np.cumsum(counts)
        start = stop - counts
        for i in range(cfg.num_clients):
            owned[i].extend(class_idx[start[i] : stop[i]].tolist())

    # Repair pass: donate one sample from the largest client to each empty one.
    for i in range(cfg.num_clients):
        if owned[i]:
            continue
        donor = max(range(cfg.num_clients), key=lambda j: (len(owned[j]), -j))
        if len(owned[donor]) <= 1:
            raise ValueError("not enough samples to repair empty clients")
        owned[i].append(owned[donor].pop())

    return Partition(
        assignments=tuple(np.array(sorted(idx), dtype=np.int64) for idx in owned)
    )


def holdout_split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministically split off a stratified held-out set.

    Returns ``(rest, heldout)`` where ``heldout`` receives ``fraction`` of the
    data, allocated per class with largest-remainder rounding so each class's
    share is within one sample of exact stratification.  Raises if any class
    would end up empty on either side.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n = len(ds)
    class_indices = [np.flatnonzero(ds.labels == c) for c in range(ds.num_classes)]
    class_sizes = np.array([len(ci) for ci in class_indices], dtype=np.float64)
    if class_sizes.min() == 0:
        empty = int(np.argmin(class_sizes))
        raise ValueError(f"class {empty} has no samples to split")
    target = int(round(fraction * n))
    held_counts = largest_remainder(class_sizes * fraction, target)
    for c in range(ds.num_classes):
        if held_counts[c] == 0 or held_counts[c] == len(class_indices[c]):
            raise ValueError(
                f"fraction {fraction} leaves class {c} empty in one split"
            )
    rng = np.random.default_rng(seed)
    held: list[np.ndarray] = []
    rest: list[np.ndarray] = []
    for c in range(ds.num_classes):
        perm = rng.permutation(class_indices[c])
        held.append(perm[: held_counts[c]])
        rest.append(perm[held_counts[c] :])
    held_idx = np.sort(np.concatenate(held))
    rest_idx = np.sort(np.concatenate(rest))
    return subset(ds, rest_idx), subset(ds, held_idx)
