"""Sampled average precision: AP over repeated balanced subsamples.

For a category with positives X, each trial draws |X| negatives uniformly
without replacement, computes AP on the union, and the trial results are
averaged. Balancing removes the dependence of AP on the positive/negative
ratio, so a rare category and a frequent one with the same recognition
quality score the same.

Also here: the exact small-pool oracle (mean AP over every negative
subset), the across-category mean, and the estimator-stability profile as
a function of the trial count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import NoEligibleCategories, NoPositives, TooManySubsets
from .metrics import average_precision_from_arrays
from .pools import EvalPool, ExampleOrigin

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit seed derivation (splitmix64 finalizer).

    Lets per-trial work run independently, in any order, without a shared
    random stream.
    """
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True, slots=True)
class SapConfig:
    """Trial count, seed, and whether background false positives join the
    negative sampling pool."""

    n_trials: int = 15
    seed: int = 0
    include_background: bool = True

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")


@dataclass(frozen=True)
class SapResult:
    """Per-trial APs for one category with their mean and population std."""

    category: int
    trial_aps: tuple[float, ...]
    mean: float
    std: float
    n_pos: int
    degenerate: bool


def _sampling_arrays(
    pool: EvalPool, include_background: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    pos_scores = np.array([e.score for e in pool.positives], dtype=np.float64)
    pos_ids = np.array([e.example_id for e in pool.positives], dtype=np.int64)
    negatives = [
        e
        for e in pool.negatives
        if include_background or e.origin is not ExampleOrigin.BACKGROUND_DETECTION
    ]
    neg_scores = np.array([e.score for e in negatives], dtype=np.float64)
    neg_ids = np.array([e.example_id for e in negatives], dtype=np.int64)
    return pos_scores, pos_ids, neg_scores, neg_ids


def _trial_ap(
    pos_scores: np.ndarray,
    pos_ids: np.ndarray,
    neg_scores: np.ndarray,
    neg_ids: np.ndarray,
    pick: np.ndarray | None,
) -> float:
    if pick is not None:
        neg_scores = neg_scores[pick]
        neg_ids = neg_ids[pick]
    scores = np.concatenate([pos_scores, neg_scores])
    ids = np.concatenate([pos_ids, neg_ids])
    flags = np.zeros(len(scores), dtype=bool)
    flags[: len(pos_scores)] = True
    return average_precision_from_arrays(scores, flags, ids)


def sampled_ap(pool: EvalPool, config: SapConfig = SapConfig()) -> SapResult:
    """Mean AP over ``config.n_trials`` balanced negative subsamples.

    Fully determined by (pool, config): trial i samples with a seed derived
    from ``config.seed`` and i. When the negative pool is smaller than the
    positive set the result is flagged degenerate and every trial simply
    uses all negatives.
    """
    if pool.n_pos == 0:
        raise NoPositives(f"category {pool.category} has no positive examples")
    pos_scores, pos_ids, neg_scores, neg_ids = _sampling_arrays(
        pool, config.include_background
    )
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    degenerate = n_neg < n_pos

    trial_aps = []
    for i in range(config.n_trials):
        if degenerate or n_neg == n_pos:
            pick = None
        else:
            rng = np.random.default_rng(mix_seed(config.seed, i))
            pick = rng.choice(n_neg, size=n_pos, replace=False)
        trial_aps.append(_trial_ap(pos_scores, pos_ids, neg_scores, neg_ids, pick))

    aps = np.array(trial_aps, dtype=np.float64)
    if float(aps.min()) == float(aps.max()):
        # identical trials: report the value itself, exact
        mean, std = float(aps[0]), 0.0
    else:
        mean, std = float(aps.mean()), float(aps.std())
    return SapResult(
        category=pool.category,
        trial_aps=tuple(float(a) for a in aps),
        mean=mean,
        std=std,
        n_pos=n_pos,
        degenerate=degenerate,
    )


def sap_exact_small(pool: EvalPool, max_subsets: int = 500_000) -> float:
    """Exact expected sampled AP: mean AP over every negative subset of size
    |positives|. Only feasible for small pools; the trial-based estimator
    must converge to this value."""
    if pool.n_pos == 0:
        raise NoPositives(f"category {pool.category} has no positive examples")
    pos_scores, pos_ids, neg_scores, neg_ids = _sampling_arrays(pool, True)
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    if n_neg <= n_pos:
        return _trial_ap(pos_scores, pos_ids, neg_scores, neg_ids, None)
    n_subsets = math.comb(n_neg, n_pos)
    if n_subsets > max_subsets:
        raise TooManySubsets(
            f"C({n_neg}, {n_pos}) = {n_subsets} subsets exceed budget {max_subsets}"
        )
    total = 0.0
    for subset in combinations(range(n_neg), n_pos):
        total += _trial_ap(
            pos_scores, pos_ids, neg_scores, neg_ids, np.array(subset, dtype=np.intp)
        )
    return total / n_subsets


def msap(
    results: Iterable[SapResult], min_examples: int = 1
) -> float:
    """Unweighted mean of per-category sampled-AP means over categories with
    at least ``min_examples`` positives."""
    eligible = [r.mean for r in results if r.n_pos >= min_examples]
    if not eligible:
        raise NoEligibleCategories(
            f"no category has {min_examples} or more positive examples"
        )
    return float(np.mean(eligible))


@dataclass(frozen=True, slots=True)
class StabilityPoint:
    """Dispersion of the sampled-AP estimate at one trial count."""

    n_trials: int
    mean: float
    std: float


def stability_profile(
    pool: EvalPool,
    trial_counts: Sequence[int],
    repeats: int = 20,
    seed: int = 0,
    include_background: bool = True,
) -> tuple[StabilityPoint, ...]:
    """How the sampled-AP estimate spreads as the trial count grows.

    For each N, the metric is recomputed ``repeats`` times with independent
    derived seeds; the mean and std of those estimates show how many trials
    are enough for a stable score.
    """
    if not trial_counts:
        raise ValueError("trial_counts must be non-empty")
    points = []
    for j, n_trials in enumerate(trial_counts):
        estimates = np.array(
            [
                sampled_ap(
                    pool,
                    SapConfig(
                        n_trials=n_trials,
                        seed=mix_seed(mix_seed(seed, j), r),
                        include_background=include_background,
                    ),
                ).mean
                for r in range(repeats)
            ]
        )
        points.append(
            StabilityPoint(int(n_trials), float(estimates.mean()), float(estimates.std()))
        )
    return tuple(points)
