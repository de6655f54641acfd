import numpy as np
import pytest

from sapeval.errors import UnknownCategory
from sapeval.pools import (
    EvalPool,
    ExampleOrigin,
    ScoredExample,
    build_eval_pool,
    pool_from_arrays,
    pools_from_scores,
)

from conftest import MICRO_DET, MICRO_GT, box, det, gt


class TestScoredExample:
    def test_rejects_score_below_sentinel(self):
        with pytest.raises(ValueError):
            ScoredExample(0, -1.5, True, ExampleOrigin.MATCHED_GT)

    def test_sentinel_allowed(self):
        ScoredExample(0, -1.0, True, ExampleOrigin.UNMATCHED_GT)


class TestEvalPool:
    def test_rejects_inconsistent_flags(self):
        pos = (ScoredExample(0, 0.5, False, ExampleOrigin.MATCHED_GT),)
        with pytest.raises(ValueError):
            EvalPool(0, pos, ())

    def test_rejects_duplicate_ids(self):
        a = ScoredExample(0, 0.5, True, ExampleOrigin.MATCHED_GT)
        b = ScoredExample(0, 0.4, False, ExampleOrigin.MATCHED_GT)
        with pytest.raises(ValueError):
            EvalPool(0, (a,), (b,))


class TestBuildEvalPool:
    def test_perfect_detector(self):
        # every annotated box detected at 1.0 for exactly its labels
        instances = [
            gt("v", 1, box(0.1, 0.1, 0.3, 0.3), {0}, 0),
            gt("v", 1, box(0.5, 0.5, 0.7, 0.7), {1}, 1),
            gt("v", 2, box(0.2, 0.2, 0.4, 0.4), {0}, 2),
        ]
        detections = [
            det("v", 1, box(0.1, 0.1, 0.3, 0.3), 0, 1.0),
            det("v", 1, box(0.5, 0.5, 0.7, 0.7), 1, 1.0),
            det("v", 2, box(0.2, 0.2, 0.4, 0.4), 0, 1.0),
        ]
        pool = build_eval_pool(instances, detections, 0)
        assert [e.score for e in pool.positives] == [1.0, 1.0]
        assert all(e.origin is ExampleOrigin.MATCHED_GT for e in pool.positives)
        assert [e.score for e in pool.negatives] == [-1.0]
        assert all(
            e.origin is not ExampleOrigin.BACKGROUND_DETECTION for e in pool.negatives
        )

    def test_stray_detection_becomes_background_negative(self):
        instances = [gt("v", 1, box(0.1, 0.1, 0.3, 0.3), {0}, 0)]
        detections = [det("v", 1, box(0.6, 0.6, 0.8, 0.8), 0, 0.7)]
        pool = build_eval_pool(instances, detections, 0)
        backgrounds = [
            e for e in pool.negatives if e.origin is ExampleOrigin.BACKGROUND_DETECTION
        ]
        assert len(backgrounds) == 1
        assert backgrounds[0].score == 0.7

    def test_micro_fixture_pool_sizes(self):
        # category 0: gt0 and gt2 positive; gt1, gt3, gt4 negative; one stray
        pool = build_eval_pool(MICRO_GT, MICRO_DET, 0)
        assert (pool.n_pos, pool.n_neg) == (2, 4)
        assert sorted(e.score for e in pool.positives) == [0.7, 0.9]
        background = [
            e for e in pool.negatives if e.origin is ExampleOrigin.BACKGROUND_DETECTION
        ]
        assert [e.score for e in background] == [0.4]

    def test_micro_fixture_other_category(self):
        # category 2 has one positive (gt0) never detected as 2
        pool = build_eval_pool(MICRO_GT, MICRO_DET, 2)
        assert pool.n_pos == 1
        assert pool.positives[0].score == -1.0
        assert pool.positives[0].origin is ExampleOrigin.UNMATCHED_GT

    def test_positive_count_independent_of_detections(self):
        for detections in ([], MICRO_DET, MICRO_DET * 1):
            pool = build_eval_pool(MICRO_GT, detections, 0)
            assert pool.n_pos == 2

    def test_cross_category_confusion_scores_negative(self):
        # a category-0 detection sitting on a category-1 box scores that
        # negative instead of becoming background
        instances = [
            gt("v", 1, box(0.1, 0.1, 0.3, 0.3), {0}, 0),
            gt("v", 1, box(0.5, 0.5, 0.7, 0.7), {1}, 1),
        ]
        detections = [det("v", 1, box(0.5, 0.5, 0.7, 0.7), 0, 0.8)]
        pool = build_eval_pool(instances, detections, 0)
        assert pool.n_pos == 1 and pool.positives[0].score == -1.0
        assert [e.score for e in pool.negatives] == [0.8]
        assert pool.negatives[0].origin is ExampleOrigin.MATCHED_GT

    def test_unknown_category(self):
        with pytest.raises(UnknownCategory):
            build_eval_pool(MICRO_GT, MICRO_DET, 99)

    def test_invalid_iou_threshold(self):
        with pytest.raises(ValueError):
            build_eval_pool(MICRO_GT, MICRO_DET, 0, iou_threshold=0.0)

    def test_detection_contributes_at_most_one_entry(self):
        pool = build_eval_pool(MICRO_GT, MICRO_DET, 0)
        det_scores = [d.score for d in MICRO_DET if d.category == 0]
        pool_scores = [
            e.score for e in pool.positives + pool.negatives if e.score >= 0
        ]
        assert all(pool_scores.count(s) <= det_scores.count(s) for s in pool_scores)


class TestPoolsFromScores:
    def test_multi_label_memberships(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.7]])
        labels = [frozenset({0}), frozenset({1}), frozenset({0, 1})]
        pools = pools_from_scores(scores, labels)
        assert pools[0].n_pos == 2 and pools[0].n_neg == 1
        assert pools[1].n_pos == 2 and pools[1].n_neg == 1
        assert {e.example_id for e in pools[0].positives} == {0, 2}

    def test_unknown_category_raises(self):
        with pytest.raises(UnknownCategory):
            pools_from_scores(np.zeros((2, 2)), [frozenset({0})] * 2, categories=[5])

    def test_pool_from_arrays_round_trip(self):
        pool = pool_from_arrays(3, [0.5, 0.25], [True, False])
        assert pool.category == 3
        assert pool.n_pos == 1 and pool.n_neg == 1
