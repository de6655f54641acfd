"""Per-category retrieval pools: ranked scored examples split into positives
and negatives.

A pool is the substrate every metric in this package consumes. In detection
mode it is built by matching predicted boxes to annotated boxes; in
classification mode it comes straight from a per-example score matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .boxes import Detection, GroundTruthInstance, _greedy_match, iou
from .errors import UnknownCategory

#: Sentinel score for ground-truth boxes no detection claimed; ranks below
#: every real detection score.
UNDETECTED_SCORE = -1.0


class ExampleOrigin(str, Enum):
    MATCHED_GT = "matched_gt"
    UNMATCHED_GT = "unmatched_gt"
    BACKGROUND_DETECTION = "background_detection"


@dataclass(frozen=True, slots=True)
class ScoredExample:
    """One ranked example: an id, a score, and whether it is a positive."""

    example_id: int
    score: float
    is_positive: bool
    origin: ExampleOrigin

    def __post_init__(self):
        if self.score < UNDETECTED_SCORE:
            raise ValueError(f"score {self.score} below sentinel {UNDETECTED_SCORE}")


@dataclass(frozen=True)
class EvalPool:
    """All scored examples for one category."""

    category: int
    positives: tuple[ScoredExample, ...]
    negatives: tuple[ScoredExample, ...]

    def __post_init__(self):
        if any(not e.is_positive for e in self.positives) or any(
            e.is_positive for e in self.negatives
        ):
            raise ValueError("positive/negative flags inconsistent with pool sides")
        ids = [e.example_id for e in self.positives + self.negatives]
        if len(ids) != len(set(ids)):
            raise ValueError("example ids must be unique within a pool")

    @property
    def n_pos(self) -> int:
        return len(self.positives)

    @property
    def n_neg(self) -> int:
        return len(self.negatives)

    def scores_ids_labels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pool content as (scores, example ids, positive flags) arrays."""
        examples = self.positives + self.negatives
        scores = np.array([e.score for e in examples], dtype=np.float64)
        ids = np.array([e.example_id for e in examples], dtype=np.int64)
        flags = np.zeros(len(examples), dtype=bool)
        flags[: len(self.positives)] = True
        return scores, ids, flags


def label_space(
    ground_truth: Iterable[GroundTruthInstance], detections: Iterable[Detection]
) -> set[int]:
    cats: set[int] = set()
    for gt in ground_truth:
        cats.update(gt.categories)
    cats.update(d.category for d in detections)
    return cats


def build_eval_pool(
    ground_truth: Sequence[GroundTruthInstance],
    detections: Sequence[Detection],
    category: int,
    iou_threshold: float = 0.5,
) -> EvalPool:
    """Build the retrieval pool for one category from detection output.

    Every annotated box becomes an example scored with the detection of
    ``category`` greedily matched to it (descending score, one-to-one,
    IoU >= threshold), or the undetected sentinel when nothing claimed it.
    Boxes labeled with the category are the positives; all other boxes are
    negatives. Detections of the category overlapping no annotated box of
    any category at the threshold become additional background negatives,
    so both categorical confusion and pure localization failures cost
    precision.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1]")
    if category not in label_space(ground_truth, detections):
        raise UnknownCategory(f"category {category} absent from ground truth and detections")

    gt_by_frame: dict[tuple[str, int], list[GroundTruthInstance]] = {}
    for gt in ground_truth:
        gt_by_frame.setdefault((gt.frame.video_id, gt.frame.timestamp), []).append(gt)
    det_by_frame: dict[tuple[str, int], list[Detection]] = {}
    for det in detections:
        if det.category == category:
            det_by_frame.setdefault(
                (det.frame.video_id, det.frame.timestamp), []
            ).append(det)

    positives: list[ScoredExample] = []
    negatives: list[ScoredExample] = []
    background: list[tuple[tuple[str, int], float, tuple[float, ...]]] = []

    for frame in sorted(set(gt_by_frame) | set(det_by_frame)):
        frame_gts = sorted(gt_by_frame.get(frame, []), key=lambda g: g.instance_id)
        frame_dets = sorted(
            det_by_frame.get(frame, []), key=lambda d: (-d.score, d.box.as_tuple())
        )
        gt_boxes = [g.box for g in frame_gts]
        match = _greedy_match(
            [d.box for d in frame_dets], gt_boxes, iou_threshold, range(len(frame_dets))
        )
        for gt, det_idx in zip(frame_gts, match.gt_match):
            if det_idx >= 0:
                score, origin = frame_dets[det_idx].score, ExampleOrigin.MATCHED_GT
            else:
                score, origin = UNDETECTED_SCORE, ExampleOrigin.UNMATCHED_GT
            example = ScoredExample(gt.instance_id, score, category in gt.categories, origin)
            (positives if example.is_positive else negatives).append(example)
        for d, det in enumerate(frame_dets):
            if match.is_true_positive[d]:
                continue
            best = max((iou(det.box, b) for b in gt_boxes), default=0.0)
            if best < iou_threshold:
                background.append((frame, det.score, det.box.as_tuple()))

    next_id = max((gt.instance_id for gt in ground_truth), default=-1) + 1
    for i, (_, score, _) in enumerate(sorted(background)):
        negatives.append(
            ScoredExample(next_id + i, score, False, ExampleOrigin.BACKGROUND_DETECTION)
        )
    return EvalPool(category, tuple(positives), tuple(negatives))


def pools_from_scores(
    scores: np.ndarray,
    labels: Sequence[frozenset[int] | set[int]],
    example_ids: Sequence[int] | None = None,
    categories: Iterable[int] | None = None,
) -> dict[int, EvalPool]:
    """Classification-mode pools from an (examples x categories) score matrix.

    Each example is a positive for every category in its label set and a
    negative for the rest; no box matching is involved.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != len(labels):
        raise ValueError("scores must be (n_examples, n_categories) aligned with labels")
    n, k = scores.shape
    ids = list(example_ids) if example_ids is not None else list(range(n))
    cats = list(categories) if categories is not None else list(range(k))
    for c in cats:
        if not 0 <= c < k:
            raise UnknownCategory(f"category {c} outside score matrix with {k} columns")
    pools: dict[int, EvalPool] = {}
    for c in cats:
        pos, neg = [], []
        for i in range(n):
            example = ScoredExample(
                ids[i], float(scores[i, c]), c in labels[i], ExampleOrigin.MATCHED_GT
            )
            (pos if example.is_positive else neg).append(example)
        pools[c] = EvalPool(c, tuple(pos), tuple(neg))
    return pools


def pool_from_arrays(
    category: int, scores: Sequence[float], is_positive: Sequence[bool]
) -> EvalPool:
    """Convenience constructor: sequential ids, classification-mode origin."""
    pos, neg = [], []
    for i, (s, y) in enumerate(zip(scores, is_positive)):
        example = ScoredExample(i, float(s), bool(y), ExampleOrigin.MATCHED_GT)
        (pos if y else neg).append(example)
    return EvalPool(category, tuple(pos), tuple(neg))
