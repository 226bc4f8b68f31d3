"""Uncertainty-driven sample rejection, coverage reports and bootstrapping.

Rejection keeps the floor(coverage * N) lowest-uncertainty samples with ties
broken by stable original order, so kept sets are nested across coverage
levels. Bootstrapping scores every training sample with the trained model,
drops the highest-uncertainty fraction and retrains from a fresh
initialization with an identical configuration.

CoverageReport serializes to CSV (one row per coverage; an undefined AUC is
an empty cell) and to JSON including the rejected ids per coverage.
BootstrapPlan serializes to JSON.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .data import Dataset
from .metrics import ScoredSet, f1_scores, roc_auc
from .train import TrainConfig, TrainedModel, fit, fit_ensemble, score_dataset
from .net import NetworkSpec

__all__ = [
    "CoverageRow",
    "CoverageReport",
    "BootstrapPlan",
    "BootstrapResult",
    "MetricTriple",
    "reject_by_uncertainty",
    "coverage_curve",
    "reject_by_probability_interval",
    "bootstrap_filter",
    "bootstrap_retrain",
]

DEFAULT_COVERAGES = (1.0, 0.9, 0.75, 0.5)


@dataclass(frozen=True)
class CoverageRow:
    coverage: float
    u_threshold: float
    n_kept: int
    auc: float | None  # None when the kept subset is single-class
    f1_pos: float
    f1_neg: float
    micro_f1: float


@dataclass
class CoverageReport:
    rows: list[CoverageRow]
    rejected_ids: dict[float, list[int]]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["coverage", "u_threshold", "n_kept", "auc", "f1_pos", "f1_neg", "micro_f1"])
            for r in self.rows:
                writer.writerow(
                    [
                        f"{r.coverage:.17g}",
                        f"{r.u_threshold:.17g}",
                        r.n_kept,
                        "" if r.auc is None else f"{r.auc:.17g}",
                        f"{r.f1_pos:.17g}",
                        f"{r.f1_neg:.17g}",
                        f"{r.micro_f1:.17g}",
                    ]
                )

    def to_json(self, path: str | Path) -> None:
        payload = {
            "rows": [
                {
                    "coverage": r.coverage,
                    "u_threshold": r.u_threshold,
                    "n_kept": r.n_kept,
                    "auc": r.auc,
                    "f1_pos": r.f1_pos,
                    "f1_neg": r.f1_neg,
                    "micro_f1": r.micro_f1,
                }
                for r in self.rows
            ],
            "rejected_ids": {f"{c:.17g}": ids for c, ids in self.rejected_ids.items()},
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


class RejectResult(NamedTuple):
    kept: ScoredSet
    u_threshold: float
    rejected_ids: list[int]


def reject_by_uncertainty(s: ScoredSet, coverage: float) -> RejectResult:
    """Keep the floor(coverage * N) samples with lowest uncertainty.

    Returns the kept subset, the implied uncertainty threshold (maximum
    uncertainty among kept samples) and the rejected ids.
    """
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must be in (0, 1]")
    n = len(s)
    n_keep = int(coverage * n)
    if n_keep == 0:
        raise ValueError(f"coverage {coverage} keeps 0 of {n} samples")
    order = np.argsort(s.uncertainties, kind="stable")
    kept_idx = np.sort(order[:n_keep])
    rejected_idx = np.sort(order[n_keep:])
    kept = s.take(kept_idx)
    return RejectResult(
        kept=kept,
        u_threshold=float(kept.uncertainties.max()),
        rejected_ids=[int(i) for i in s.ids[rejected_idx]],
    )


def coverage_curve(
    s: ScoredSet, coverages: Sequence[float] = DEFAULT_COVERAGES, threshold: float = 0.5
) -> CoverageReport:
    """Reject-then-evaluate at each coverage level, at a fixed decision threshold."""
    cov = sorted(set(float(c) for c in coverages), reverse=True)
    if len(cov) != len(coverages):
        raise ValueError("coverage levels must be unique")
    rows: list[CoverageRow] = []
    rejected: dict[float, list[int]] = {}
    for c in cov:
        result = reject_by_uncertainty(s, c)
        kept = result.kept
        single_class = len(np.unique(kept.labels)) < 2
        auc = None if single_class else roc_auc(kept)
        f = f1_scores(kept, threshold)
        rows.append(
            CoverageRow(
                coverage=c,
                u_threshold=result.u_threshold,
                n_kept=len(kept),
                auc=auc,
                f1_pos=f.f1_pos,
                f1_neg=f.f1_neg,
                micro_f1=f.micro,
            )
        )
        rejected[c] = result.rejected_ids
    return CoverageReport(rows=rows, rejected_ids=rejected)


class IntervalRejectResult(NamedTuple):
    kept: ScoredSet
    realized_coverage: float


def reject_by_probability_interval(s: ScoredSet, delta: float) -> IntervalRejectResult:
    """Drop samples whose score lies in the closed interval [0.5-delta, 0.5+delta].

    The baseline exclusion rule for probability-only models; reports the
    realized coverage since the kept count depends on the score distribution.
    """
    if not 0.0 <= delta < 0.5:
        raise ValueError("delta must be in [0, 0.5)")
    outside = np.abs(s.scores - 0.5) > delta
    kept_idx = np.flatnonzero(outside)
    if len(kept_idx) == 0:
        raise ValueError(f"delta {delta} rejects every sample")
    return IntervalRejectResult(
        kept=s.take(kept_idx), realized_coverage=len(kept_idx) / len(s)
    )


def interval_delta_for_coverage(s: ScoredSet, coverage: float) -> float:
    """Smallest delta whose closed-interval rejection keeps about coverage * N."""
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must be in (0, 1]")
    margins = np.sort(np.abs(s.scores - 0.5))
    n_reject = len(s) - int(coverage * len(s))
    if n_reject == 0:
        return 0.0 if not np.any(margins == 0.0) else -1.0  # -1 signals impossible
    return float(margins[n_reject - 1])


@dataclass
class BootstrapPlan:
    """Partition of a training set into kept and dropped ids for one epsilon."""

    epsilon: float
    kept_ids: list[int]
    dropped_ids: list[int]

    def to_json(self, path: str | Path) -> None:
        payload = {
            "epsilon": self.epsilon,
            "kept_ids": self.kept_ids,
            "dropped_ids": self.dropped_ids,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def bootstrap_filter(train: Dataset, model: TrainedModel, epsilon: float) -> BootstrapPlan:
    """Drop the ceil(epsilon * N) highest-uncertainty training samples.

    Uncertainties come from the model evaluated on its own training data.
    Errors out if the kept subset collapses to a single class.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    scored = score_dataset(model, train)
    n = len(scored)
    n_keep = int((1.0 - epsilon) * n)
    if n_keep == 0:
        raise ValueError(f"epsilon {epsilon} drops every sample")
    order = np.argsort(scored.uncertainties, kind="stable")
    kept_idx = order[:n_keep]
    dropped_idx = order[n_keep:]
    kept_labels = scored.labels[kept_idx]
    if len(np.unique(kept_labels)) < 2:
        raise ValueError(
            f"epsilon {epsilon} leaves a single-class training set "
            f"({n_keep} samples, all label {int(kept_labels[0])})"
        )
    return BootstrapPlan(
        epsilon=epsilon,
        kept_ids=[int(i) for i in scored.ids[np.sort(kept_idx)]],
        dropped_ids=[int(i) for i in scored.ids[np.sort(dropped_idx)]],
    )


class MetricTriple(NamedTuple):
    auc: float
    f1_pos: float
    f1_neg: float


@dataclass
class BootstrapResult:
    epsilon: float
    model: TrainedModel
    plan: BootstrapPlan | None  # None for epsilon = 0 (no filtering)

    def evaluate(self, test: Dataset, threshold: float = 0.5) -> MetricTriple:
        scored = score_dataset(self.model, test)
        f = f1_scores(scored, threshold)
        return MetricTriple(auc=roc_auc(scored), f1_pos=f.f1_pos, f1_neg=f.f1_neg)


def bootstrap_retrain(
    train: Dataset,
    val: Dataset,
    spec: NetworkSpec,
    cfg: TrainConfig,
    epsilons: Sequence[float],
    base_model: TrainedModel | None = None,
) -> dict[float, BootstrapResult]:
    """Train a base model, filter per epsilon, retrain fresh on each subset.

    Every retrain uses the identical configuration (including the seed, so
    epsilon = 0 reproduces the base model exactly). A pre-trained base model
    can be supplied to skip the base fit.
    """
    train_fn: Callable[..., TrainedModel] = fit_ensemble if cfg.ensemble_m > 1 else fit
    if base_model is None:
        base_model = train_fn(train, val, spec, cfg)

    results: dict[float, BootstrapResult] = {}
    for eps in epsilons:
        eps = float(eps)
        if eps == 0.0:
            results[eps] = BootstrapResult(epsilon=0.0, model=base_model, plan=None)
            continue
        plan = bootstrap_filter(train, base_model, eps)
        filtered = train.subset_by_ids(plan.kept_ids)
        retrained = train_fn(filtered, val, spec, cfg)
        results[eps] = BootstrapResult(epsilon=eps, model=retrained, plan=plan)
    return results
