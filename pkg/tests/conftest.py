import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = str(getattr(report, "nodeid", ""))
            if getattr(report, "when", "call") != "call":
                continue
            if "test_acceptance.py::test_criterion" in nodeid:
                name = nodeid.split("::")[-1]
                lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")

from sapeval.boxes import BoundingBox, Detection, FrameKey, GroundTruthInstance
from sapeval.pools import pool_from_arrays


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_pool(pos_scores, neg_scores, category=0):
    scores = list(pos_scores) + list(neg_scores)
    flags = [True] * len(pos_scores) + [False] * len(neg_scores)
    return pool_from_arrays(category, scores, flags)


def random_pool(rng, n_pos, n_total, category=0):
    scores = rng.random(n_total)
    flags = np.zeros(n_total, dtype=bool)
    flags[:n_pos] = True
    return pool_from_arrays(category, scores, flags)


def box(x1, y1, x2, y2):
    return BoundingBox(x1, y1, x2, y2)


def gt(video, ts, b, cats, instance_id):
    return GroundTruthInstance(FrameKey(video, ts), b, frozenset(cats), instance_id)


def det(video, ts, b, cat, score):
    return Detection(FrameKey(video, ts), b, cat, score)


# The 3-frame micro-fixture used across detection tests. For category 0 it
# yields 2 positives and 4 negatives (3 other-category boxes + 1 stray).
#   frame (v1, 1): gt0 labeled {0, 2} detected by cat-0 @0.9; gt1 labeled {1}
#                  detected by cat-1 @0.8
#   frame (v1, 2): gt2 labeled {0} detected by cat-0 @0.7 (shifted but
#                  IoU > 0.5); plus a stray cat-0 box @0.4 overlapping nothing
#   frame (v2, 1): gt3 labeled {1} detected by cat-1 @0.6; gt4 labeled {1}
#                  undetected
MICRO_GT = [
    gt("v1", 1, box(0.1, 0.1, 0.3, 0.3), {0, 2}, 0),
    gt("v1", 1, box(0.5, 0.5, 0.7, 0.7), {1}, 1),
    gt("v1", 2, box(0.2, 0.2, 0.4, 0.4), {0}, 2),
    gt("v2", 1, box(0.1, 0.6, 0.3, 0.8), {1}, 3),
    gt("v2", 1, box(0.6, 0.1, 0.8, 0.3), {1}, 4),
]

MICRO_DET = [
    det("v1", 1, box(0.1, 0.1, 0.3, 0.3), 0, 0.9),
    det("v1", 1, box(0.5, 0.5, 0.7, 0.7), 1, 0.8),
    det("v1", 2, box(0.21, 0.21, 0.41, 0.41), 0, 0.7),
    det("v1", 2, box(0.7, 0.7, 0.9, 0.9), 0, 0.4),
    det("v2", 1, box(0.1, 0.6, 0.3, 0.8), 1, 0.6),
]
