"""Detection metrics: AUC, fixed-threshold accuracy, Pd at a fixed FAR, ROC."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .imagecore import DegenerateDataError, InvalidInputError


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Scores of synthetic (positives) and real (negatives) images."""

    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        for name in ("positives", "negatives"):
            v = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if v.size == 0:
                raise DegenerateDataError(f"{name} must be non-empty")
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"{name} contain non-finite scores")
            object.__setattr__(self, name, v)

    @classmethod
    def from_labels(cls, scores, labels) -> ScoreSet:
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
        return cls(scores[labels == 1], scores[labels == 0])


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    # boundaries of runs of equal values
    edges = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(x)]])
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc(s: ScoreSet) -> float:
    """Mann-Whitney AUC with ties counted 1/2, via midranks."""
    n_p, n_n = s.positives.size, s.negatives.size
    ranks = _midranks(np.concatenate([s.positives, s.negatives]))
    u = ranks[:n_p].sum() - n_p * (n_p + 1) / 2.0
    return float(u / (n_p * n_n))


def auc_pairwise(s: ScoreSet) -> float:
    """O(n^2) reference for :func:`auc`."""
    p = s.positives[:, None]
    n = s.negatives[None, :]
    wins = np.sum(p > n) + 0.5 * np.sum(p == n)
    return float(wins / (s.positives.size * s.negatives.size))


def accuracy_at(s: ScoreSet, threshold: float) -> float:
    """Positives count when strictly above the threshold; ties go to 'real'."""
    correct = np.sum(s.positives > threshold) + np.sum(s.negatives <= threshold)
    return float(correct / (s.positives.size + s.negatives.size))


def far_threshold(negatives: np.ndarray, far: float) -> float:
    """Smallest negative score t with #(neg > t) / |neg| <= far."""
    neg = np.sort(negatives)
    n = neg.size
    # #(neg > neg[i]) is n - (index past the last copy of neg[i])
    above = n - np.searchsorted(neg, neg, side="right")
    ok = above <= far * n
    return float(neg[np.argmax(ok)])


def pd_at_far(s: ScoreSet, far: float) -> float:
    """Probability of detection with an empirical false-alarm rate never above ``far``."""
    if not 0 < far < 1:
        raise InvalidInputError(f"far must be in (0, 1), got {far}")
    if s.negatives.size < math.ceil(1.0 / far):
        warnings.warn(
            f"only {s.negatives.size} negatives; Pd@{far:g} is coarse", RuntimeWarning, stacklevel=2
        )
    t = far_threshold(s.negatives, far)
    return float(np.mean(s.positives > t))


def roc_curve(s: ScoreSet) -> list[tuple[float, float]]:
    """(FAR, Pd) for the thresholds +inf, every distinct score descending, -inf.

    A sample is declared synthetic when its score is >= the threshold.
    """
    thresholds = np.unique(np.concatenate([s.positives, s.negatives]))[::-1]
    pos = np.sort(s.positives)
    neg = np.sort(s.negatives)
    tp = pos.size - np.searchsorted(pos, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg, thresholds, side="left")
    pts = [(0.0, 0.0)]
    pts += [(f / neg.size, t / pos.size) for f, t in zip(fp.tolist(), tp.tolist())]
    pts.append((1.0, 1.0))
    return pts


def trapezoid_area(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


def write_roc_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["far", "pd"])
        for f, p in points:
            w.writerow([repr(f), repr(p)])


def summarize(s: ScoreSet, threshold: float = 0.0) -> dict:
    """The four reporting metrics; ``threshold`` is on the logit scale (0 = p 0.5)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            "auc": auc(s),
            "acc_at_0.5": accuracy_at(s, threshold),
            "pd_at_5": pd_at_far(s, 0.05),
            "pd_at_1": pd_at_far(s, 0.01),
            "n_pos": int(s.positives.size),
            "n_neg": int(s.negatives.size),
        }
