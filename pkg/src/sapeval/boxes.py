"""Box-level data model and detection-to-ground-truth matching.

Boxes use normalized corner coordinates in [0, 1]. A frame is identified
by (video_id, timestamp) and ground truth is multi-label: one annotated
box may carry several category ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box with normalized corners, x1 < x2 and y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (0.0 <= self.x1 < self.x2 <= 1.0 and 0.0 <= self.y1 < self.y2 <= 1.0):
            raise ValueError(f"invalid box corners: {self!r}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x1, self.y1, self.x2, self.y2


@dataclass(frozen=True, slots=True)
class FrameKey:
    """Key frame identifier: a video id plus an integer timestamp in seconds."""

    video_id: str
    timestamp: int


@dataclass(frozen=True, slots=True)
class GroundTruthInstance:
    """One annotated box with its (non-empty) set of category labels."""

    frame: FrameKey
    box: BoundingBox
    categories: frozenset[int]
    instance_id: int

    def __post_init__(self):
        if not self.categories:
            raise ValueError("ground-truth instance needs at least one category")


@dataclass(frozen=True, slots=True)
class Detection:
    """One predicted box for a single category, scored in [0, 1]."""

    frame: FrameKey
    box: BoundingBox
    category: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 when identical."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class MatchResult:
    """Outcome of greedy matching within one frame.

    ``is_true_positive`` is aligned with the input detection order;
    ``gt_match`` is aligned with the input ground-truth order and holds the
    index of the matched detection, or -1 when the box went undetected.
    """

    is_true_positive: tuple[bool, ...]
    gt_match: tuple[int, ...]

    def gt_scores(self, scores: Sequence[float], missing: float = -1.0) -> list[float]:
        return [scores[d] if d >= 0 else missing for d in self.gt_match]


def match_detections(
    detections: Sequence[Detection],
    ground_truth: Sequence[BoundingBox],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedily match detections to ground-truth boxes, one-to-one.

    Detections are processed in descending score order (stable on ties).
    Each claims the still-unmatched box it overlaps most, provided the IoU
    reaches ``iou_threshold``; anything left unmatched is a false positive.
    The assignment is invariant to the input ordering when scores are
    distinct.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1]")
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    return _greedy_match(
        [detections[i].box for i in order], ground_truth, iou_threshold, order
    )


def _greedy_match(
    boxes_by_rank: Sequence[BoundingBox],
    ground_truth: Sequence[BoundingBox],
    iou_threshold: float,
    original_index: Sequence[int],
) -> MatchResult:
    is_tp = [False] * len(boxes_by_rank)
    gt_match = [-1] * len(ground_truth)
    taken = [False] * len(ground_truth)
    for rank, box in enumerate(boxes_by_rank):
        best_gt = -1
        best_iou = 0.0
        for g, gt_box in enumerate(ground_truth):
            if taken[g]:
                continue
            overlap = iou(box, gt_box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_gt = g
                best_iou = overlap
        if best_gt >= 0:
            taken[best_gt] = True
            gt_match[best_gt] = original_index[rank]
            is_tp[original_index[rank]] = True
    return MatchResult(tuple(is_tp), tuple(gt_match))
