"""Binary classification metrics: confusion matrix, accuracy, recall, ROC, AUC.

Predictions use ``score >= threshold`` everywhere in the package so that
GA fitness and the reported metrics agree.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError

THRESHOLD = 0.5


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self):
        return asdict(self)


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DataError(f"length mismatch: {scores.size} scores vs {labels.size} labels")
    if scores.size == 0:
        raise DataError("no samples")
    return scores, labels.astype(bool)


def confusion(scores, labels, threshold=THRESHOLD) -> ConfusionMatrix:
    scores, pos = _check(scores, labels)
    pred = scores >= threshold
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise DataError("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def recall(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise DataError("recall undefined without positive samples")
    return cm.tp / (cm.tp + cm.fn)


def roc_points(scores, labels):
    """ROC curve as an (m, 2) array of (fpr, tpr), from (0, 0) to (1, 1).

    One step per distinct score, thresholds descending; tied scores move
    both coordinates at once, which gives tied pairs half credit under the
    trapezoid rule.
    """
    scores, pos = _check(scores, labels)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    tps = np.cumsum(p)
    fps = np.cumsum(~p)
    # last index of each run of equal scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    fpr = np.r_[0.0, fps[last] / n_neg]
    tpr = np.r_[0.0, tps[last] / n_pos]
    if fpr[-1] != 1.0 or tpr[-1] != 1.0:  # pragma: no cover - cumsum ends at the totals
        fpr, tpr = np.r_[fpr, 1.0], np.r_[tpr, 1.0]
    return np.column_stack([fpr, tpr])


def auc(points) -> float:
    points = np.asarray(points, dtype=np.float64)
    x, y = points[:, 0], points[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def summarize(scores, labels, threshold=THRESHOLD):
    """The per-approach numbers that go into the run report."""
    cm = confusion(scores, labels, threshold)
    pts = roc_points(scores, labels)
    return {
        "accuracy": accuracy(cm),
        "recall": recall(cm),
        "auc": auc(pts),
        "confusion": cm.to_dict(),
    }, pts


def write_roc_csv(points, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in points:
            w.writerow([repr(float(fpr)), repr(float(tpr))])
