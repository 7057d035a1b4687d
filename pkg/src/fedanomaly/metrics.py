"""Anomaly-detection metrics and validation-set threshold selection.

Conventions: label 1 is an anomaly, a higher score is more anomalous, a sample
is flagged when ``score >= threshold``, and 0/0 precision or recall counts as
0. AUROC counts tied positive/negative pairs as one half. AUPR is average
precision, ``sum_i (R_i - R_{i-1}) * P_i`` over the distinct score values in
descending order, with no trapezoidal interpolation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import MetricError

THRESHOLD_WINDOW = 20.0  # percentile points either side of the normal fraction
THRESHOLD_STEP = 0.1


def _as_pair(scores, labels, need_both: bool = True):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int8)
    if s.shape != y.shape:
        raise MetricError(f"{s.size} scores but {y.size} labels")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    if np.any((y != 0) & (y != 1)):
        raise MetricError("labels must be 0/1")
    if need_both and (y.sum() == 0 or y.sum() == y.size):
        raise MetricError("metric undefined: need at least one anomaly and one inlier")
    return s, y


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


def confusion_at(scores, labels, threshold: float) -> Confusion:
    s, y = _as_pair(scores, labels, need_both=False)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    return Confusion(tp, fp, tn, fn)


def _average_ranks(s: np.ndarray) -> np.ndarray:
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # boundaries of tie groups in sorted order
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], s.size]
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1..end
    ranks = np.empty(s.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg), ties counted as 1/2."""
    s, y = _as_pair(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    r_pos = _average_ranks(s)[y == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _descending_counts(s: np.ndarray, y: np.ndarray):
    """Cumulative (TP, FP) at each distinct score, highest first."""
    order = np.argsort(-s, kind="mergesort")
    ss, yy = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(ss)), ss.size - 1]
    tp = np.cumsum(yy)[last]
    fp = (last + 1) - tp
    return ss[last], tp, fp


def aupr(scores, labels) -> float:
    s, y = _as_pair(scores, labels)
    _, tp, fp = _descending_counts(s, y)
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def roc_curve(scores, labels):
    """(FPR, TPR) points from (0, 0) to (1, 1), one per distinct threshold."""
    s, y = _as_pair(scores, labels)
    _, tp, fp = _descending_counts(s, y)
    return np.r_[0.0, fp / (y.size - y.sum())], np.r_[0.0, tp / y.sum()]


def percentile_window(anomaly_ratio: float) -> tuple[float, float, np.ndarray]:
    """Percentiles ``p0 + 0.1 k`` within ``delta`` of ``p0 = 100 * (1 - ratio)``, plus both window ends."""
    p0 = 100.0 * (1.0 - anomaly_ratio)
    delta = min(p0, 100.0 - p0, THRESHOLD_WINDOW)
    k = int(np.floor(delta / THRESHOLD_STEP + 1e-9))
    steps = p0 + THRESHOLD_STEP * np.arange(-k, k + 1)
    grid = np.unique(np.clip(np.r_[p0 - delta, steps, p0 + delta], 0.0, 100.0))
    return p0, delta, grid


def _f1_at(sorted_scores: np.ndarray, sorted_pos_cum: np.ndarray, n_pos: int, thr: np.ndarray) -> np.ndarray:
    # number of samples / positives with score >= thr, via the ascending sort
    below = np.searchsorted(sorted_scores, thr, side="left")
    flagged = sorted_scores.size - below
    tp = n_pos - np.where(below > 0, sorted_pos_cum[np.maximum(below - 1, 0)], 0)
    p = np.divide(tp, flagged, out=np.zeros(thr.size), where=flagged > 0)
    r = tp / n_pos
    return np.divide(2 * p * r, p + r, out=np.zeros(thr.size), where=(p + r) > 0)


def threshold_candidates(scores, labels, exhaustive: bool = False) -> np.ndarray:
    s, y = _as_pair(scores, labels)
    _, _, grid = percentile_window(float(y.mean()))
    q = np.percentile(s, grid)
    if not exhaustive:
        return q
    lo, hi = q[0], q[-1]
    u = np.unique(s)
    mids = (u[:-1] + u[1:]) / 2.0
    return np.unique(np.r_[lo, hi, mids[(mids >= lo) & (mids <= hi)]])


def optimal_threshold(scores, labels, exhaustive: bool = False) -> float:
    """Candidate threshold with the highest F1; ties go to the smallest threshold.

    Candidates are the score percentiles on a 0.1-point grid within
    ``min(p0, 100 - p0, 20)`` points of ``p0``, the normal fraction in percent.
    ``exhaustive=True`` instead tries every midpoint between distinct scores
    inside the same window.
    """
    s, y = _as_pair(scores, labels)
    cand = threshold_candidates(s, y, exhaustive)
    order = np.argsort(s, kind="mergesort")
    f1 = _f1_at(s[order], np.cumsum(y[order]), int(y.sum()), cand)
    best = f1.max()
    return float(cand[f1 == best].min())


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    auroc: float
    aupr: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    val_f1: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_scores(val_scores, val_labels, test_scores, test_labels, exhaustive: bool = False) -> MetricsReport:
    thr = optimal_threshold(val_scores, val_labels, exhaustive)
    val_cm = confusion_at(val_scores, val_labels, thr)
    cm = confusion_at(test_scores, test_labels, thr)
    return MetricsReport(
        precision=cm.precision,
        recall=cm.recall,
        f1=cm.f1,
        auroc=auroc(test_scores, test_labels),
        aupr=aupr(test_scores, test_labels),
        threshold=thr,
        tp=cm.tp, fp=cm.fp, tn=cm.tn, fn=cm.fn,
        val_f1=val_cm.f1,
    )


def evaluate(model, split, exhaustive: bool = False) -> MetricsReport:
    """Threshold on the validation scores, every reported metric on the test scores."""
    from .models import anomaly_scores

    return evaluate_scores(
        anomaly_scores(model, split.val.X), split.val.y,
        anomaly_scores(model, split.test.X), split.test.y,
        exhaustive,
    )
