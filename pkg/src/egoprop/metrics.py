"""Classification metrics: AUC, precision/recall/F1, threshold sweep, APME."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateScoresError, DimensionError


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DimensionError(
            f"scores shape {s.shape} and labels shape {y.shape} must be "
            "equal 1-D")
    return s, y.astype(np.int64)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg), ties credited 0.5.

    Computed via average ranks, which is exactly the pairwise count.
    Raises DegenerateScoresError when only one class is present.
    """
    s, y = _as_arrays(scores, labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateScoresError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    ranks = np.empty(len(s))
    # average 1-based rank per tie group
    boundaries = np.flatnonzero(np.diff(s_sorted)) + 1
    start = 0
    for stop in list(boundaries) + [len(s)]:
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
        start = stop
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def prf(scores, labels, threshold: float) -> tuple[float, float, float, Confusion]:
    """Precision/recall/F1 predicting positive iff score >= threshold.

    Zero-denominator cases (no predicted positives, no true positives)
    return 0.0 by convention.
    """
    s, y = _as_arrays(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, Confusion(tp, fp, tn, fn)


def f1_best_sweep(scores, labels) -> tuple[float, float, list[ThresholdPoint]]:
    """Maximize F1 over all distinct score thresholds plus a -inf sentinel.

    Prediction sets only change at distinct score values, so this sweep is
    exact. Returns (best F1, smallest threshold attaining it, full grid).
    """
    s, _ = _as_arrays(scores, labels)
    thresholds = [-math.inf] + sorted(set(float(v) for v in s))
    grid: list[ThresholdPoint] = []
    best_f1, best_thr = 0.0, -math.inf
    for t in thresholds:
        p, r, f1, _ = prf(scores, labels, t)
        grid.append(ThresholdPoint(t, p, r, f1))
        if f1 > best_f1:
            best_f1, best_thr = f1, t
    return best_f1, best_thr, grid


def apme(predicted, actual) -> float:
    """Mean absolute percentage error of count forecasts.

    mean over entries of |predicted - actual| / actual; requires strictly
    positive actual counts.
    """
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise DimensionError(
            f"predicted shape {p.shape} and actual shape {a.shape} must be "
            "equal 1-D")
    if np.any(a <= 0):
        raise ValueError("apme: actual counts must be strictly positive")
    return float(np.mean(np.abs(p - a) / a))


def _thr_to_json(t: float):
    return "-inf" if t == -math.inf else t


def _thr_from_json(t) -> float:
    return -math.inf if t == "-inf" else float(t)


@dataclass
class EvalReport:
    """Full evaluation summary for one scored split.

    ``precision``/``recall``/``f1`` are at threshold 0.5; ``f1_best`` is the
    sweep maximum. ``apme`` is present only in forecast mode (keyed by
    horizon). best_threshold serializes as the string "-inf" when the
    all-positive sentinel wins the sweep.
    """

    auc: float
    precision: float
    recall: float
    f1: float
    f1_best: float
    best_threshold: float
    confusion_at_half: Confusion
    confusion_at_best: Confusion
    grid: list[ThresholdPoint] = field(default_factory=list)
    apme: dict[str, float] | None = None

    CSV_COLUMNS = ("auc", "precision", "recall", "f1", "f1_best",
                   "best_threshold", "tp", "fp", "tn", "fn")

    @classmethod
    def from_scores(cls, scores, labels) -> "EvalReport":
        area = auc(scores, labels)
        p, r, f1, conf_half = prf(scores, labels, 0.5)
        best_f1, best_thr, grid = f1_best_sweep(scores, labels)
        _, _, _, conf_best = prf(scores, labels, best_thr)
        return cls(area, p, r, f1, best_f1, best_thr, conf_half, conf_best, grid)

    def to_dict(self) -> dict:
        out = {
            "auc": self.auc,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "f1_best": self.f1_best,
            "best_threshold": _thr_to_json(self.best_threshold),
            "confusion_at_half": self.confusion_at_half.to_dict(),
            "confusion_at_best": self.confusion_at_best.to_dict(),
            "grid": [
                {"threshold": _thr_to_json(pt.threshold), "precision": pt.precision,
                 "recall": pt.recall, "f1": pt.f1}
                for pt in self.grid
            ],
        }
        if self.apme is not None:
            out["apme"] = dict(sorted(self.apme.items()))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            auc=d["auc"],
            precision=d["precision"],
            recall=d["recall"],
            f1=d["f1"],
            f1_best=d["f1_best"],
            best_threshold=_thr_from_json(d["best_threshold"]),
            confusion_at_half=Confusion(**d["confusion_at_half"]),
            confusion_at_best=Confusion(**d["confusion_at_best"]),
            grid=[ThresholdPoint(_thr_from_json(pt["threshold"]), pt["precision"],
                                 pt["recall"], pt["f1"]) for pt in d["grid"]],
            apme=d.get("apme"),
        )

    def csv_row(self) -> list[str]:
        c = self.confusion_at_half
        vals = [self.auc, self.precision, self.recall, self.f1, self.f1_best,
                _thr_to_json(self.best_threshold), c.tp, c.fp, c.tn, c.fn]
        return [str(v) for v in vals]
