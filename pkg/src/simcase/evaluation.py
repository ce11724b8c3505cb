"""Classification metrics, precision-recall curves and recall-floor threshold retuning.

Thresholds everywhere follow one convention: a document is predicted
positive iff ``score >= threshold``.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auprc: float
    threshold: float
    counts: ConfusionCounts
    model: str = ""
    bp_id: str = ""


@dataclass(frozen=True)
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    if y.sum() == 0:
        raise ValueError("no positive labels: recall is undefined")
    return s, y


def confusion(scores, labels, threshold: float) -> ConfusionCounts:
    s, y = _check(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return ConfusionCounts(tp, fp, len(y) - tp - fp - fn, fn)


def metrics_from_counts(c: ConfusionCounts) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1); precision is 1 when nothing is predicted positive."""
    total = c.positives + c.negatives
    accuracy = (c.tp + c.tn) / total
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 1.0
    recall = c.tp / c.positives
    return accuracy, precision, recall, f1_score(precision, recall)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_metrics(scores, labels, threshold: float, model: str = "", bp_id: str = "") -> EvaluationReport:
    s, y = _check(scores, labels)
    counts = confusion(s, y, threshold)
    acc, prec, rec, f1 = metrics_from_counts(counts)
    return EvaluationReport(acc, prec, rec, f1, auprc(s, y), float(threshold), counts, model, bp_id)


def pr_curve(scores, labels) -> PRCurve:
    """Precision/recall at each distinct score, highest threshold first; ties share a point."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_block = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(y_sorted)[last_of_block]
    predicted = np.flatnonzero(last_of_block) + 1
    return PRCurve(tp / y.sum(), tp / predicted, s_sorted[last_of_block])


def auprc(scores, labels) -> float:
    """Step-wise average precision: sum over thresholds of (recall gain) x precision."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_block = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(y_sorted)[last_of_block]
    predicted = np.flatnonzero(last_of_block) + 1
    new_tp = np.diff(np.r_[0, tp])
    # sum new_tp * precision, divided once by P, so perfect rankings give exactly 1.0
    return float(np.sum(new_tp * (tp / predicted)) / y.sum())


def min_count_for_recall(p: float, n_pos: int) -> int:
    """Smallest k with k / n_pos >= p, robust to float error in ``p * n_pos``."""
    k = max(1, math.ceil(p * n_pos))
    while k > 1 and (k - 1) / n_pos >= p:
        k -= 1
    while k < n_pos and k / n_pos < p:
        k += 1
    return k


def retune_threshold(scores, labels, dates: Sequence[dt.date], publication_date: dt.date, p: float) -> float:
    """Largest threshold keeping recall >= ``p`` on positives dated on/after publication.

    With the post-publication positive scores sorted descending, this is
    the ``ceil(p * P)``-th of them.
    """
    if not 0 < p <= 1:
        raise ValueError("recall floor p must lie in (0, 1]")
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if not len(s) == len(y) == len(dates):
        raise ValueError("scores, labels and dates differ in length")
    after = np.array([d >= publication_date for d in dates], dtype=bool)
    ground = np.sort(s[(y == 1) & after])[::-1]
    if len(ground) == 0:
        raise ValueError("no positive document dated on or after the publication date")
    k = min_count_for_recall(p, len(ground))
    return float(ground[k - 1])


def recall_at(scores, labels, threshold: float) -> float:
    s, y = _check(scores, labels)
    return float(np.sum((s >= threshold) & (y == 1)) / y.sum())
