"""Synthetic long-tail feature datasets, oversampling, and the head/tail
category split.

The generator draws per-category Gaussian feature clusters whose sizes
follow a Zipf curve, producing the kind of imbalance (a handful of huge
categories, a long tail of tiny ones) that motivates balanced-sample
evaluation and two-stage training.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import CategoryMismatch, EmptyCategory
from .sampling import mix_seed


class EmptySplitWarning(UserWarning):
    """A category has too few examples to appear in every split."""


@dataclass(frozen=True)
class ZipfSpec:
    """Shape of the synthetic dataset.

    Category k (0-indexed, most frequent first) gets
    ``clamp(round(max_count * (k+1)**-exponent), min_count, max_count)``
    examples, drawn from an isotropic Gaussian around a distinct unit-norm
    mean direction. With probability ``multilabel_rate`` an example picks
    up one extra co-occurring label, weighted by category frequency.
    """

    n_categories: int = 20
    exponent: float = 1.2
    max_count: int = 2000
    min_count: int = 2
    feature_dim: int = 16
    cluster_spread: float = 0.8
    multilabel_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_categories < 1:
            raise ValueError("n_categories must be at least 1")
        if self.exponent < 0:
            raise ValueError("exponent must be non-negative")
        if not 1 <= self.min_count <= self.max_count:
            raise ValueError("need max_count >= min_count >= 1")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")
        if not 0.0 <= self.multilabel_rate < 1.0:
            raise ValueError("multilabel_rate must lie in [0, 1)")


@dataclass(frozen=True)
class Example:
    """One feature vector with its labels; the first label is the category
    whose cluster generated the features."""

    example_id: int
    features: np.ndarray
    labels: tuple[int, ...]

    @property
    def primary(self) -> int:
        return self.labels[0]

    @property
    def label_set(self) -> frozenset[int]:
        return frozenset(self.labels)


@dataclass
class FeatureDataset:
    """Feature vectors with multi-hot labels for one split."""

    examples: list[Example]
    split: str
    n_categories: int

    def __len__(self) -> int:
        return len(self.examples)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([e.features for e in self.examples])

    def label_sets(self) -> list[frozenset[int]]:
        return [e.label_set for e in self.examples]

    def contains_counts(self) -> np.ndarray:
        """Per-category count of examples carrying each label."""
        counts = np.zeros(self.n_categories, dtype=np.int64)
        for e in self.examples:
            for c in e.labels:
                counts[c] += 1
        return counts

    def primary_counts(self) -> np.ndarray:
        counts = np.zeros(self.n_categories, dtype=np.int64)
        for e in self.examples:
            counts[e.primary] += 1
        return counts


@dataclass(frozen=True)
class HeadTailSplit:
    """Disjoint partition of the categories into data-rich head and tail."""

    head: frozenset[int]
    tail: frozenset[int]
    threshold: float

    def __post_init__(self):
        if self.head & self.tail:
            raise ValueError("head and tail must be disjoint")

    @property
    def categories(self) -> frozenset[int]:
        return self.head | self.tail


def zipf_counts(spec: ZipfSpec) -> list[int]:
    """Per-category example counts along the Zipf curve, most frequent first."""
    return [
        min(
            max(round(spec.max_count * (k + 1) ** -spec.exponent), spec.min_count),
            spec.max_count,
        )
        for k in range(spec.n_categories)
    ]


def _cluster_means(spec: ZipfSpec, rng: np.random.Generator) -> np.ndarray:
    """Unit-norm cluster means kept apart by rejection sampling, so
    categories are learnable but mutually confusable."""
    min_cos = math.cos(math.radians(25.0))
    means: list[np.ndarray] = []
    for _ in range(spec.n_categories):
        threshold = min_cos
        while True:
            v = rng.normal(size=spec.feature_dim)
            norm = np.linalg.norm(v)
            if norm == 0.0:
                continue
            v /= norm
            if all(abs(float(v @ m)) < threshold for m in means):
                break
            threshold = 1.0 - 0.995 * (1.0 - threshold)  # relax a little, retry
            if threshold >= 1.0 - 1e-12:  # separation impossible at this dim
                break
        means.append(v)
    return np.stack(means)


def _split_sizes(count: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder allocation; guarantees one example per split when
    the count permits."""
    raw = [count * f for f in fractions]
    sizes = [int(math.floor(r)) for r in raw]
    remainders = [r - s for r, s in zip(raw, sizes)]
    for _ in range(count - sum(sizes)):
        i = max(range(len(fractions)), key=lambda j: (remainders[j], -j))
        sizes[i] += 1
        remainders[i] = -1.0
    if count >= len(fractions):
        while min(sizes) == 0:
            sizes[sizes.index(max(sizes))] -= 1
            sizes[sizes.index(min(sizes))] += 1
    return sizes


def synthesize_dataset(
    spec: ZipfSpec,
    split_fractions: Sequence[float] = (0.7, 0.15, 0.15),
    split_names: Sequence[str] = ("train", "val", "test"),
) -> dict[str, FeatureDataset]:
    """Generate Zipf-imbalanced Gaussian-cluster data, stratified per split.

    Deterministic for a given spec: the same seed reproduces the datasets
    bit-for-bit. Categories whose count is below the number of splits are
    flagged with :class:`EmptySplitWarning` and simply missing from some
    splits.
    """
    if len(split_fractions) != len(split_names):
        raise ValueError("split_fractions and split_names must align")
    if abs(sum(split_fractions) - 1.0) > 1e-9 or min(split_fractions) <= 0:
        raise ValueError("split fractions must be positive and sum to 1")

    counts = zipf_counts(spec)
    rng = np.random.default_rng(mix_seed(spec.seed, 0))
    means = _cluster_means(spec, rng)
    weights = np.asarray(counts, dtype=np.float64)

    per_split: dict[str, list[Example]] = {name: [] for name in split_names}
    next_id = 0
    for k, count in enumerate(counts):
        features = means[k] + spec.cluster_spread * rng.normal(
            size=(count, spec.feature_dim)
        )
        labels: list[tuple[int, ...]] = []
        for _ in range(count):
            extra: tuple[int, ...] = ()
            if spec.multilabel_rate > 0 and rng.random() < spec.multilabel_rate:
                w = weights.copy()
                w[k] = 0.0
                if w.sum() > 0:
                    extra = (int(rng.choice(spec.n_categories, p=w / w.sum())),)
            labels.append((k, *extra))

        if count < len(split_names):
            warnings.warn(
                f"category {k} has {count} examples for {len(split_names)} splits",
                EmptySplitWarning,
                stacklevel=2,
            )
        order = rng.permutation(count)
        sizes = _split_sizes(count, split_fractions)
        cursor = 0
        for name, size in zip(split_names, sizes):
            for i in order[cursor : cursor + size]:
                per_split[name].append(
                    Example(next_id, features[i].astype(np.float64), labels[i])
                )
                next_id += 1
            cursor += size

    return {
        name: FeatureDataset(examples, name, spec.n_categories)
        for name, examples in per_split.items()
    }


def oversample_balance(dataset: FeatureDataset, seed: int = 0) -> list[int]:
    """Duplicate tail examples until every category carries roughly the mass
    of the most frequent one.

    Each example counts toward its rarest label. Per category, the example
    list is repeated whole until it reaches the target (the largest
    per-category count) and trimmed to it exactly, so multiplicities within
    a category differ by at most one round. The returned index multiset is
    shuffled by ``seed``.
    """
    contains = dataset.contains_counts()
    for c in range(dataset.n_categories):
        if contains[c] == 0:
            raise EmptyCategory(f"category {c} has no examples in split {dataset.split!r}")

    groups: dict[int, list[int]] = {}
    for i, example in enumerate(dataset.examples):
        rarest = min(example.labels, key=lambda c: (contains[c], c))
        groups.setdefault(rarest, []).append(i)

    target = max(len(g) for g in groups.values())
    indices: list[int] = []
    for c in sorted(groups):
        group = groups[c]
        copies = -(-target // len(group))  # ceil
        indices.extend((group * copies)[:target])

    rng = np.random.default_rng(mix_seed(seed, 1))
    return [indices[i] for i in rng.permutation(len(indices))]


def split_head_tail(
    train_ap: Mapping[int, float],
    val_ap: Mapping[int, float],
    threshold: float = 0.0,
) -> HeadTailSplit:
    """Partition categories by the train-minus-validation AP gap.

    A category whose training AP does not exceed its validation AP by more
    than ``threshold`` goes to the tail: the model never had enough of its
    examples to fit them, let alone overfit.
    """
    if set(train_ap) != set(val_ap):
        raise CategoryMismatch(
            f"train/val categories differ: {sorted(set(train_ap) ^ set(val_ap))}"
        )
    head, tail = set(), set()
    for c in train_ap:
        if train_ap[c] - val_ap[c] <= threshold:
            tail.add(c)
        else:
            head.add(c)
    return HeadTailSplit(frozenset(head), frozenset(tail), threshold)
