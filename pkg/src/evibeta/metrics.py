"""Evaluation metrics: ROC-AUC, per-class and micro-averaged F1, working point.

ROC-AUC uses the rank (Mann-Whitney) formulation with ties counted 1/2,
which equals trapezoidal integration of the ROC curve. Micro F1 pools
TP/FP/FN over both classes, which for single-label binary data equals
accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = ["ScoredSet", "F1Scores", "roc_auc", "f1_scores", "best_working_point"]


@dataclass
class ScoredSet:
    """Scores (predicted positive-class probability), labels and uncertainties."""

    scores: np.ndarray
    labels: np.ndarray
    uncertainties: np.ndarray
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.uncertainties = np.asarray(self.uncertainties, dtype=float)
        if self.ids is None:
            self.ids = np.arange(len(self.scores))
        else:
            self.ids = np.asarray(self.ids)
        n = len(self.scores)
        if n == 0:
            raise ValueError("scored set must be nonempty")
        if not (len(self.labels) == len(self.uncertainties) == len(self.ids) == n):
            raise ValueError("scores, labels, uncertainties and ids must have equal length")

    def __len__(self) -> int:
        return len(self.scores)

    def take(self, idx: np.ndarray) -> "ScoredSet":
        return ScoredSet(
            scores=self.scores[idx],
            labels=self.labels[idx],
            uncertainties=self.uncertainties[idx],
            ids=self.ids[idx],
        )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(s: ScoredSet) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties as 1/2."""
    pos = s.labels == 1
    n_pos = int(pos.sum())
    n_neg = len(s) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc requires both classes present")
    ranks = _average_ranks(s.scores)
    rank_sum = ranks[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


class F1Scores(NamedTuple):
    f1_pos: float
    f1_neg: float
    micro: float


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def f1_scores(s: ScoredSet, threshold: float) -> F1Scores:
    """Per-class F1 at `score >= threshold`, plus pooled-count micro F1."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    pred = s.scores >= threshold
    actual = s.labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    f1_pos = _f1(tp, fp, fn)
    # Negative class as the positive one: its TP are the TN above.
    f1_neg = _f1(tn, fn, fp)
    micro = _f1(tp + tn, fp + fn, fn + fp)
    return F1Scores(f1_pos, f1_neg, micro)


def best_working_point(s: ScoredSet) -> float:
    """Threshold maximizing the mean of per-class F1 scores.

    Candidates are the midpoints between consecutive unique scores plus
    {0, 1}, so a perfectly separating gap yields its midpoint. Ties go to the
    candidate nearest 0.5; an exact distance tie resolves to 0.5 itself.
    """
    if len(np.unique(s.labels)) < 2:
        raise ValueError("best_working_point requires both classes present")
    uniq = np.unique(s.scores)
    midpoints = (uniq[:-1] + uniq[1:]) / 2.0
    candidates = np.unique(np.concatenate([midpoints, [0.0, 1.0]]))
    candidates = candidates[(candidates >= 0.0) & (candidates <= 1.0)]

    values = np.array(
        [0.5 * sum(f1_scores(s, float(t))[:2]) for t in candidates]
    )
    winners = candidates[values >= values.max() - 1e-15]
    dist = np.abs(winners - 0.5)
    nearest = winners[dist == dist.min()]
    return float(nearest[0]) if len(nearest) == 1 else 0.5
