"""Beta-opinion algebra and the evidential loss.

Per-class evidence (e_pos, e_neg) maps to a beta opinion with
alpha = e_pos + 1, beta = e_neg + 1, total evidence E = alpha + beta,
beliefs b = e / E, uncertainty mass u = 2 / E and expected probabilities
p_pos = alpha / E, p_neg = beta / E.

The training loss for a labeled sample is the Bayes-risk data term (closed
form of the squared-error risk under the beta posterior) plus an annealed
KL regularizer that penalizes evidence left after clamping one shape
parameter to 1. The clamping direction is configurable, see `reg_loss`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .specfun import BetaParams, beta_kl_to_uniform, trigamma

__all__ = [
    "EVIDENCE_FLOOR",
    "Evidence",
    "BetaOpinion",
    "LabeledTarget",
    "AnnealedWeight",
    "RegMode",
    "opinion_from_evidence",
    "data_loss",
    "data_loss_mc_oracle",
    "reg_loss",
    "total_loss",
    "TotalLoss",
    "loss_gradient_wrt_evidence",
    "anneal",
]

# Evidence below this is treated as exactly zero so alpha, beta >= 1 holds
# exactly rather than up to roundoff.
EVIDENCE_FLOOR = 1e-12

# Which clamped opinion the KL regularizer is evaluated at. "assigned" keeps
# the shape parameter of the labeled class and clamps the other to 1 (the
# default); "contrary" keeps the opposite parameter, so only evidence against
# the label is penalized. See the README discussion of the two readings.
RegMode = Literal["assigned", "contrary"]


@dataclass(frozen=True)
class Evidence:
    """Nonnegative per-class evidence (e_pos, e_neg)."""

    e_pos: float
    e_neg: float

    def __post_init__(self):
        if not (math.isfinite(self.e_pos) and math.isfinite(self.e_neg)):
            raise ValueError("evidence must be finite")
        if self.e_pos < 0.0 or self.e_neg < 0.0:
            raise ValueError("evidence must be nonnegative")


@dataclass(frozen=True)
class BetaOpinion:
    """A beta opinion: shape parameters with derived beliefs and probabilities."""

    alpha: float
    beta: float
    belief_pos: float
    belief_neg: float
    uncertainty: float
    prob_pos: float
    prob_neg: float
    total_evidence: float

    @classmethod
    def from_alpha_beta(cls, alpha: float, beta: float) -> "BetaOpinion":
        if alpha < 1.0 or beta < 1.0:
            raise ValueError("opinion requires alpha, beta >= 1")
        return opinion_from_evidence(Evidence(alpha - 1.0, beta - 1.0))

    def params(self) -> BetaParams:
        return BetaParams(self.alpha, self.beta)


@dataclass(frozen=True)
class LabeledTarget:
    """Binary label with its one-hot encoding ordered as (positive, negative)."""

    label: int
    one_hot: tuple[float, float] = field(init=False)

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        hot = (1.0, 0.0) if self.label == 1 else (0.0, 1.0)
        object.__setattr__(self, "one_hot", hot)


@dataclass(frozen=True)
class AnnealedWeight:
    """Regularizer coefficient, ramped linearly from lambda_zero to lambda_max."""

    lambda_now: float = 0.1
    lambda_zero: float = 0.1
    lambda_max: float = 1.0
    anneal_epochs: int = 10

    def __post_init__(self):
        if not self.lambda_zero <= self.lambda_now <= self.lambda_max:
            raise ValueError(
                f"need lambda_zero <= lambda_now <= lambda_max, got "
                f"({self.lambda_zero}, {self.lambda_now}, {self.lambda_max})"
            )
        if self.anneal_epochs < 0:
            raise ValueError("anneal_epochs must be >= 0")


def anneal(w: AnnealedWeight, epoch: int) -> AnnealedWeight:
    """Weight schedule at a given epoch: linear ramp, clipped at lambda_max."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if w.anneal_epochs == 0:
        return replace(w, lambda_now=w.lambda_max)
    lam = w.lambda_zero + (w.lambda_max - w.lambda_zero) * epoch / w.anneal_epochs
    return replace(w, lambda_now=min(w.lambda_max, lam))


def opinion_from_evidence(ev: Evidence) -> BetaOpinion:
    """Map evidence to its beta opinion (beliefs, uncertainty, probabilities)."""
    e_pos = ev.e_pos if ev.e_pos >= EVIDENCE_FLOOR else 0.0
    e_neg = ev.e_neg if ev.e_neg >= EVIDENCE_FLOOR else 0.0
    alpha = e_pos + 1.0
    beta = e_neg + 1.0
    total = alpha + beta
    return BetaOpinion(
        alpha=alpha,
        beta=beta,
        belief_pos=e_pos / total,
        belief_neg=e_neg / total,
        uncertainty=2.0 / total,
        prob_pos=alpha / total,
        prob_neg=beta / total,
        total_evidence=total,
    )


def data_loss(op: BetaOpinion, target: LabeledTarget) -> float:
    """Squared-error Bayes risk of the opinion against the label.

    (y - p_pos)^2 + (1 - y - p_neg)^2 plus the prediction-variance term
    [p_pos(1 - p_pos) + p_neg(1 - p_neg)] / (E + 1).
    """
    y_pos, y_neg = target.one_hot
    p, q = op.prob_pos, op.prob_neg
    fit = (y_pos - p) ** 2 + (y_neg - q) ** 2
    var = (p * (1.0 - p) + q * (1.0 - q)) / (op.total_evidence + 1.0)
    return fit + var


def data_loss_mc_oracle(
    op: BetaOpinion, target: LabeledTarget, n_samples: int, seed: int = 0
) -> tuple[float, float]:
    """Monte-Carlo estimate of the Bayes-risk integral, with standard error.

    Draws p ~ Beta(alpha, beta) and averages ||one_hot - (p, 1-p)||^2.
    Test-only companion to `data_loss`; the two must agree within MC error.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    p = rng.beta(op.alpha, op.beta, size=n_samples)
    y_pos, y_neg = target.one_hot
    values = (y_pos - p) ** 2 + (y_neg - (1.0 - p)) ** 2
    est = float(values.mean())
    sem = float(values.std(ddof=1) / math.sqrt(n_samples))
    return est, sem


def _clamped_params(op: BetaOpinion, target: LabeledTarget, mode: RegMode) -> BetaParams:
    keep_pos = (target.label == 1) == (mode == "assigned")
    if keep_pos:
        return BetaParams(op.alpha, 1.0)
    return BetaParams(1.0, op.beta)


def reg_loss(op: BetaOpinion, target: LabeledTarget, mode: RegMode = "assigned") -> float:
    """KL of the clamped opinion to the uniform beta.

    mode "assigned" (default) substitutes (alpha, 1) for label 1 and
    (1, beta) for label 0, so the penalty grows with evidence for the labeled
    class. mode "contrary" swaps the substitution and penalizes only evidence
    against the label, which is the convention of earlier evidential losses.
    """
    return beta_kl_to_uniform(_clamped_params(op, target, mode))


class TotalLoss(NamedTuple):
    total: float
    mean: float


def total_loss(
    ops: Sequence[BetaOpinion],
    targets: Sequence[LabeledTarget],
    w: AnnealedWeight,
    mode: RegMode = "assigned",
) -> TotalLoss:
    """Sum over samples of data_loss + lambda_now * reg_loss, plus the mean."""
    if len(ops) != len(targets):
        raise ValueError(f"length mismatch: {len(ops)} opinions vs {len(targets)} targets")
    if not ops:
        raise ValueError("need at least one sample")
    total = sum(
        data_loss(op, t) + w.lambda_now * reg_loss(op, t, mode)
        for op, t in zip(ops, targets)
    )
    return TotalLoss(total=total, mean=total / len(ops))


def loss_gradient_wrt_evidence(
    ev: Evidence,
    target: LabeledTarget,
    w: AnnealedWeight,
    mode: RegMode = "assigned",
) -> tuple[float, float]:
    """Analytic (d/de_pos, d/de_neg) of data_loss + lambda_now * reg_loss."""
    e = np.array([ev.e_pos]), np.array([ev.e_neg])
    y = np.array([float(target.label)])
    _, g_pos, g_neg = batch_loss_and_grad(e[0], e[1], y, w.lambda_now, mode)
    return float(g_pos[0]), float(g_neg[0])


def batch_loss_and_grad(
    e_pos: np.ndarray,
    e_neg: np.ndarray,
    y: np.ndarray,
    lam: float,
    mode: RegMode = "assigned",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized per-sample loss and its gradient wrt both evidence channels.

    The hot path for network training; `loss_gradient_wrt_evidence` and the
    backward pass both route through here.
    """
    e_pos = np.where(e_pos < EVIDENCE_FLOOR, 0.0, e_pos)
    e_neg = np.where(e_neg < EVIDENCE_FLOOR, 0.0, e_neg)
    alpha = e_pos + 1.0
    beta = e_neg + 1.0
    total = alpha + beta
    p = alpha / total
    q = beta / total

    # Data term in vector form; with q = 1 - p it collapses to
    # 2 (y - p)^2 + 2 p (1 - p) / (E + 1).
    fit = (y - p) ** 2 + ((1.0 - y) - q) ** 2
    var = (p * (1.0 - p) + q * (1.0 - q)) / (total + 1.0)
    losses = fit + var

    # dp/de_pos = beta / E^2, dp/de_neg = -alpha / E^2.
    inv_total2 = 1.0 / (total * total)
    dp_dpos = beta * inv_total2
    dp_dneg = -alpha * inv_total2
    common = -4.0 * (y - p) + 2.0 * (1.0 - 2.0 * p) / (total + 1.0)
    var_shrink = 2.0 * p * (1.0 - p) / (total + 1.0) ** 2
    g_pos = common * dp_dpos - var_shrink
    g_neg = common * dp_dneg - var_shrink

    if lam != 0.0:
        # The regularizer keeps exactly one shape parameter; its KL value and
        # derivative depend only on that parameter a:
        #   KL(a) = KL(Beta(a,1) or Beta(1,a) || Beta(1,1))
        #   dKL/da = (a - 1) (psi'(a) - psi'(a + 1))
        keep_pos = (y == 1.0) if mode == "assigned" else (y == 0.0)
        a = np.where(keep_pos, alpha, beta)
        dkl = (a - 1.0) * (trigamma(a) - trigamma(a + 1.0))
        kl = _kl_one_sided(a)
        losses = losses + lam * kl
        g_pos = g_pos + lam * np.where(keep_pos, dkl, 0.0)
        g_neg = g_neg + lam * np.where(keep_pos, 0.0, dkl)

    return losses, g_pos, g_neg


def _kl_one_sided(a: np.ndarray) -> np.ndarray:
    """KL(Beta(a, 1) || Beta(1, 1)) = ln a - 1 + 1/a, vectorized, a >= 1."""
    return np.log(a) - 1.0 + 1.0 / a
