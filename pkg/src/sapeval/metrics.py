"""Ranking metrics over evaluation pools: precision/recall, average
precision, detection-protocol AP, mean AP, ROC-AUC, and the analytic
baseline a random scorer converges to.

Ranking is always by descending score with ties broken by ascending
example id, so every metric here is reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .boxes import Detection, GroundTruthInstance, match_detections
from .errors import DegeneratePool, InvalidCounts, NoEligibleCategories, NoPositives
from .pools import EvalPool

DEFAULT_MIN_EXAMPLES = 25


@dataclass(frozen=True, slots=True)
class PrPoint:
    """One point on the stepwise precision/recall curve."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float


@dataclass(frozen=True, slots=True)
class CategoryScore:
    """A per-category metric value plus the pool sizes behind it."""

    category: int
    value: float
    n_pos: int
    n_neg: int


def _ranked_positive_flags(
    scores: np.ndarray, is_positive: np.ndarray, ids: np.ndarray | None
) -> np.ndarray:
    """Positive flags in rank order (descending score, ascending id)."""
    if ids is None:
        ids = np.arange(len(scores))
    order = np.lexsort((ids, -scores))
    return is_positive[order]


def average_precision_from_arrays(
    scores: np.ndarray,
    is_positive: np.ndarray,
    ids: np.ndarray | None = None,
) -> float:
    """AP of a ranked example set: mean, over positives, of the precision at
    each positive's rank. Equals the area under the stepwise PR curve."""
    scores = np.asarray(scores, dtype=np.float64)
    is_positive = np.asarray(is_positive, dtype=bool)
    n_pos = int(is_positive.sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive example")
    flags = _ranked_positive_flags(scores, is_positive, ids)
    cum_tp = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1)
    return float((cum_tp[flags] / ranks[flags]).sum() / n_pos)


def average_precision(pool: EvalPool) -> float:
    scores, ids, flags = pool.scores_ids_labels()
    return average_precision_from_arrays(scores, flags, ids)


def precision_recall_curve(pool: EvalPool) -> tuple[PrPoint, ...]:
    """The stepwise PR curve, one point per ranked example."""
    scores, ids, flags = pool.scores_ids_labels()
    n_pos = int(flags.sum())
    if n_pos == 0:
        raise NoPositives("PR curve needs at least one positive example")
    ranked = _ranked_positive_flags(scores, flags, ids)
    points = []
    tp = fp = 0
    for flag in ranked:
        if flag:
            tp += 1
        else:
            fp += 1
        points.append(
            PrPoint(tp, fp, n_pos - tp, tp / (tp + fp), tp / n_pos)
        )
    return tuple(points)


def frame_ap(
    ground_truth: Sequence[GroundTruthInstance],
    detections: Sequence[Detection],
    category: int,
    iou_threshold: float = 0.5,
) -> float:
    """Detection-protocol AP for one category.

    Detections are matched greedily to same-frame annotated boxes carrying
    the category, then all of them are ranked globally by score and AP is
    computed with the category's annotation count as the number of
    positives. An empty detection set scores 0.
    """
    positive_gts: dict[tuple[str, int], list] = {}
    n_pos = 0
    for g in ground_truth:
        if category in g.categories:
            positive_gts.setdefault((g.frame.video_id, g.frame.timestamp), []).append(g.box)
            n_pos += 1
    if n_pos == 0:
        raise NoPositives(f"no ground-truth instances for category {category}")

    cat_dets = [d for d in detections if d.category == category]
    if not cat_dets:
        return 0.0
    by_frame: dict[tuple[str, int], list[Detection]] = {}
    for d in cat_dets:
        by_frame.setdefault((d.frame.video_id, d.frame.timestamp), []).append(d)

    scores: list[float] = []
    tp_flags: list[bool] = []
    for frame in sorted(by_frame):
        frame_dets = sorted(by_frame[frame], key=lambda d: (-d.score, d.box.as_tuple()))
        result = match_detections(frame_dets, positive_gts.get(frame, []), iou_threshold)
        scores.extend(d.score for d in frame_dets)
        tp_flags.extend(result.is_true_positive)

    flags = np.asarray(tp_flags, dtype=bool)
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    ranked = flags[order]
    cum_tp = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    return float((cum_tp[ranked] / ranks[ranked]).sum() / n_pos)


def mean_ap(
    scores: Iterable[CategoryScore], min_examples: int = DEFAULT_MIN_EXAMPLES
) -> float:
    """Unweighted mean over categories with at least ``min_examples`` positives."""
    eligible = [s.value for s in scores if s.n_pos >= min_examples]
    if not eligible:
        raise NoEligibleCategories(
            f"no category has {min_examples} or more positive examples"
        )
    return float(np.mean(eligible))


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(
        np.r_[True, sorted_vals[1:] != sorted_vals[:-1], True]
    )
    starts, ends = boundaries[:-1], boundaries[1:]
    group_ranks = (starts + 1 + ends) / 2.0
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = np.repeat(group_ranks, ends - starts)
    return ranks


def roc_auc(pool: EvalPool) -> float:
    """Probability that a random positive outranks a random negative
    (rank-sum statistic; tied scores count one half)."""
    if pool.n_pos == 0 or pool.n_neg == 0:
        raise DegeneratePool("ROC-AUC needs at least one positive and one negative")
    scores, _, flags = pool.scores_ids_labels()
    ranks = _midranks(scores)
    n_pos, n_neg = pool.n_pos, pool.n_neg
    rank_sum = float(ranks[flags].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def random_baseline_ap(n_pos: int, n_total: int) -> float:
    """Expected AP of a uniformly random scorer: the positive ratio.

    Precision of a random ranking sits at the pool's positive ratio at
    every recall level, so AP collapses to n_pos / n_total (large-sample
    limit).
    """
    if not 0 < n_pos <= n_total:
        raise InvalidCounts(f"need 0 < n_pos <= n_total, got {n_pos}/{n_total}")
    return n_pos / n_total
