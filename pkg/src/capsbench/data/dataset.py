"""Samples, deterministic splits and K-fold partitions."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Sample:
    image: np.ndarray    # H x W x 1, values in [0, 1]
    label: int
    source_id: str = ""

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = img[..., None]
        self.image = img
        self.label = int(self.label)


def validate_samples(samples, n_classes: int | None = None) -> None:
    for s in samples:
        if s.image.min() < 0 or s.image.max() > 1:
            raise ValueError(f"sample {s.source_id!r} has pixels outside [0, 1]")
        if s.label < 0 or (n_classes is not None and s.label >= n_classes):
            raise ValueError(f"sample {s.source_id!r} has label {s.label} outside [0, {n_classes})")


def stack(samples) -> tuple[np.ndarray, np.ndarray]:
    """Images as ``N x H x W x 1`` and labels as ``N``."""
    if not samples:
        return np.zeros((0, 0, 0, 1)), np.zeros(0, dtype=np.int64)
    return (np.stack([s.image for s in samples]),
            np.array([s.label for s in samples], dtype=np.int64))


@dataclass
class DatasetSplit:
    train: list[Sample]
    validation: list[Sample]
    test: list[Sample]
    seed: int
    fractions: tuple[float, float, float] = field(default=(0.70, 0.15, 0.15))

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _cut(n: int, fractions) -> tuple[int, int]:
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    n_val = min(n_val, n - n_train)
    return n_train, n_val


def split_dataset(samples, seed: int = 0, stratified: bool = True,
                  fractions=(0.70, 0.15, 0.15)) -> DatasetSplit:
    """Shuffle deterministically by ``seed`` and cut train/validation/test.

    Stratified splits cut each class separately, so every class is within one
    sample of the requested fractions.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    samples = list(samples)
    rng = np.random.default_rng(seed)
    if stratified:
        groups = defaultdict(list)
        for i, s in enumerate(samples):
            groups[s.label].append(i)
        parts = [[], [], []]
        for label in sorted(groups):
            idx = np.asarray(groups[label])[rng.permutation(len(groups[label]))]
            n_train, n_val = _cut(len(idx), fractions)
            parts[0].extend(idx[:n_train])
            parts[1].extend(idx[n_train:n_train + n_val])
            parts[2].extend(idx[n_train + n_val:])
        # interleave classes within each part
        parts = [np.asarray(p, dtype=np.int64)[rng.permutation(len(p))] for p in parts]
    else:
        idx = rng.permutation(len(samples))
        n_train, n_val = _cut(len(idx), fractions)
        parts = [idx[:n_train], idx[n_train:n_train + n_val], idx[n_train + n_val:]]
    train, val, test = ([samples[i] for i in p] for p in parts)
    return DatasetSplit(train, val, test, seed, tuple(fractions))


def kfold_split(samples, K: int = 5, repeats: int = 1, seed: int = 0):
    """``repeats * K`` (train, validation) pairs; each repeat's validation
    folds partition the data."""
    if K < 2:
        raise ValueError("K must be >= 2")
    samples = list(samples)
    if len(samples) < K:
        raise ValueError(f"need at least K={K} samples, got {len(samples)}")
    rng = np.random.default_rng(seed)
    folds = []
    for _ in range(repeats):
        order = rng.permutation(len(samples))
        chunks = np.array_split(order, K)
        for k in range(K):
            val_idx = set(chunks[k].tolist())
            train = [samples[i] for i in order if i not in val_idx]
            val = [samples[i] for i in chunks[k]]
            folds.append((train, val))
    return folds
