"""Analytics over 1-5 human judgments: interpolated ROC, EER, AUROC, accuracy."""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import DegenerateLabels


@dataclass
class ROCCurve:
    """Operating points (FAR, TPR) sorted by FAR, including (0,0) and (1,1)."""

    points: List[Tuple[float, float]]

    def __post_init__(self):
        fars = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        if any(b < a for a, b in zip(fars, fars[1:])):
            raise ValueError("operating points must be sorted by FAR")
        if any(b < a for a, b in zip(tprs, tprs[1:])):
            raise ValueError("TPR must be non-decreasing along the curve")


def _split_scores(records: Sequence, labels: Dict[str, int]):
    """Group scores by ground truth; records need .pair_id and .score."""
    same, diff = [], []
    for rec in records:
        label = labels[rec.pair_id]
        (same if label == 1 else diff).append(rec.score)
    if not same or not diff:
        raise DegenerateLabels("need judgments on both same and different pairs")
    return np.array(same), np.array(diff)


def interpolated_roc(records: Sequence, labels: Dict[str, int]) -> ROCCurve:
    """ROC over the four decision thresholds of the 5-point scale.

    Predict-same when score >= t for t in {2, 3, 4, 5}; (0,0) and (1,1) are
    appended as the reject-all / accept-all endpoints.
    """
    same, diff = _split_scores(records, labels)
    points = [(0.0, 0.0)]
    for t in (5, 4, 3, 2):  # strictest first so FAR is non-decreasing
        tpr = float(np.mean(same >= t))
        far = float(np.mean(diff >= t))
        points.append((far, tpr))
    points.append((1.0, 1.0))
    return ROCCurve(points=points)


def eer_auroc_from_roc(curve: ROCCurve) -> Tuple[float, float]:
    """EER at the interpolated FAR = 1 - TPR crossing; AUROC by trapezoid."""
    pts = curve.points
    eer = None
    for (f1, t1), (f2, t2) in zip(pts, pts[1:]):
        g1 = t1 + f1 - 1.0  # crosses zero where TPR = 1 - FAR
        g2 = t2 + f2 - 1.0
        if g1 <= 0.0 <= g2:
            if g1 == g2:
                eer = f1
            else:
                s = -g1 / (g2 - g1)
                eer = f1 + s * (f2 - f1)
            break
    if eer is None:  # curve starts above the anti-diagonal
        eer = pts[0][0]

    auroc = 0.0
    for (f1, t1), (f2, t2) in zip(pts, pts[1:]):
        auroc += (f2 - f1) * (t1 + t2) / 2.0
    return float(eer), float(auroc)


def binary_accuracy(records: Sequence, labels: Dict[str, int],
                    borderline_to_positive: bool = True) -> float:
    """Predict-same iff score >= 3 (>= 4 if borderline counts as negative)."""
    same, diff = _split_scores(records, labels)
    threshold = 3 if borderline_to_positive else 4
    correct = int(np.sum(same >= threshold)) + int(np.sum(diff < threshold))
    return correct / (same.size + diff.size)


def model_accuracy_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Threshold maximizing predict-same-iff-score>=t accuracy on validation.

    Accuracy is piecewise constant in t with region boundaries at the unique
    score values; ties resolve to the midpoint of the (merged) tying interval.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not ((labels == 1).any() and (labels == 0).any()):
        raise DegenerateLabels("validation needs both classes")

    uniq = np.unique(scores)
    n = labels.size
    # decision regions in t-space: (-inf, u0], (u0, u1], ..., (u_last, +inf)
    reps = [uniq[0]]
    reps += [(a + b) / 2.0 for a, b in zip(uniq, uniq[1:])]
    reps += [uniq[-1] + 1.0]
    accs = [float(np.sum((scores >= t) == (labels == 1))) / n for t in reps]

    best = max(accs)
    winners = [j for j, a in enumerate(accs) if a == best]
    # merge the contiguous run around the first winner into one interval
    run = [winners[0]]
    for j in winners[1:]:
        if j == run[-1] + 1:
            run.append(j)
        else:
            break
    lo_j, hi_j = run[0], run[-1]
    lower = None if lo_j == 0 else uniq[lo_j - 1]
    upper = None if hi_j == len(reps) - 1 else uniq[hi_j]
    if lower is not None and upper is not None:
        return float((lower + upper) / 2.0)
    if lower is None and upper is not None:
        return float(upper)  # accept-all boundary: t = min score
    if lower is not None:
        return float(lower + 1.0)  # reject-all region has no midpoint
    return float(uniq[0])  # single region: every threshold ties
