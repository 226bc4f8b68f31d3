"""Training loop with annealing and early stopping; deep ensembles by evidence averaging.

Everything is deterministic in (datasets, config, seed): shuffles, dropout
masks, member subsets and member inits all derive from one seed sequence.
Validation loss is always computed at lambda_max so the early-stopping signal
is not confounded by the moving annealing weight, and the returned parameters
are the snapshot from the best validation epoch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .data import Dataset
from .evidential import (
    EVIDENCE_FLOOR,
    AnnealedWeight,
    BetaOpinion,
    Evidence,
    RegMode,
    anneal,
    opinion_from_evidence,
)
from .net import (
    Gradients,
    ModelParams,
    NetworkSpec,
    backward,
    forward_evidence_batch,
    forward_sigmoid_batch,
    init_params,
)
from .metrics import ScoredSet

__all__ = [
    "TrainConfig",
    "EpochStats",
    "TrainedModel",
    "TrainingDiverged",
    "fit",
    "fit_ensemble",
    "predict",
    "predict_batch",
    "score_dataset",
    "write_history_csv",
]


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss is encountered during training."""


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 60
    batch_size: int = 32
    patience: int = 3
    lr: float = 1e-3
    optimizer: Literal["sgd", "adam"] = "adam"
    anneal: AnnealedWeight = field(default_factory=AnnealedWeight)
    reg_mode: RegMode = "assigned"
    ensemble_m: int = 1
    ensemble_subset_frac: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.ensemble_m < 1:
            raise ValueError("ensemble_m must be >= 1")
        if not 0.0 < self.ensemble_subset_frac <= 1.0:
            raise ValueError("ensemble_subset_frac must be in (0, 1]")
        if self.epochs_max < 1:
            raise ValueError("epochs_max must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    lam: float


@dataclass
class TrainedModel:
    """One or more trained members sharing a spec, with per-member histories."""

    members: list[ModelParams]
    spec: NetworkSpec
    histories: list[list[EpochStats]]

    @property
    def history(self) -> list[EpochStats]:
        """History of the sole member; ensembles expose `histories`."""
        if len(self.histories) != 1:
            raise ValueError("ensemble model: use .histories")
        return self.histories[0]


class _Adam:
    """First/second-moment adaptive updates (bias-corrected)."""

    def __init__(self, params: ModelParams, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params: ModelParams, grads: Gradients) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i in range(len(params.weights)):
            for value, grad, m, v in (
                (params.weights[i], grads.weights[i], self.m_w[i], self.v_w[i]),
                (params.biases[i], grads.biases[i], self.m_b[i], self.v_b[i]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ModelParams, grads: Gradients) -> None:
        for i in range(len(params.weights)):
            params.weights[i] -= self.lr * grads.weights[i]
            params.biases[i] -= self.lr * grads.biases[i]


def _mean_loss(params: ModelParams, x: np.ndarray, y: np.ndarray, w: AnnealedWeight, reg_mode: RegMode) -> float:
    _, loss = backward(params, (x, y), w, mode="eval", reg_mode=reg_mode)
    return loss


def fit(
    train: Dataset,
    val: Dataset,
    spec: NetworkSpec,
    cfg: TrainConfig,
    _seed_override: int | None = None,
) -> TrainedModel:
    """Train a single model with minibatch steps, annealing and early stopping.

    Stops once validation loss has failed to improve for max(1, patience)
    consecutive epochs; patience=0 therefore stops at the first
    non-improvement. Raises TrainingDiverged on a non-finite loss.
    """
    if cfg.ensemble_m != 1:
        raise ValueError("fit trains a single member; use fit_ensemble")
    if len(train.samples) == 0 or len(val.samples) == 0:
        raise ValueError("train and val datasets must be nonempty")

    seed = cfg.seed if _seed_override is None else _seed_override
    ss = np.random.SeedSequence(seed)
    init_seed, shuffle_seed, dropout_seed_root = (int(s.generate_state(1)[0]) for s in ss.spawn(3))

    params = init_params(spec, init_seed)
    optimizer = _Adam(params, cfg.lr) if cfg.optimizer == "adam" else _Sgd(cfg.lr)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    x_train, y_train = train.features_matrix(), train.labels_array().astype(float)
    x_val, y_val = val.features_matrix(), val.labels_array().astype(float)
    n = x_train.shape[0]
    val_weight = replace(cfg.anneal, lambda_now=cfg.anneal.lambda_max)
    mode = "train" if spec.dropout_rate > 0.0 else "eval"

    history: list[EpochStats] = []
    best_params = params.copy()
    best_val = np.inf
    stall = 0
    step = 0

    for epoch in range(cfg.epochs_max):
        w = anneal(cfg.anneal, epoch)
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads, loss = backward(
                params,
                (x_train[idx], y_train[idx]),
                w,
                mode=mode,
                dropout_seed=dropout_seed_root + step if mode == "train" else None,
                reg_mode=cfg.reg_mode,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            optimizer.step(params, grads)
            epoch_losses.append(loss)
            step += 1

        train_loss = float(np.mean(epoch_losses))
        val_loss = _mean_loss(params, x_val, y_val, val_weight, cfg.reg_mode)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        history.append(EpochStats(epoch, train_loss, val_loss, w.lambda_now))

        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            stall = 0
        else:
            stall += 1
            if stall >= max(1, cfg.patience):
                break

    return TrainedModel(members=[best_params], spec=spec, histories=[history])


def fit_ensemble(train: Dataset, val: Dataset, spec: NetworkSpec, cfg: TrainConfig) -> TrainedModel:
    """Train ensemble_m members on independent subsets of floor(frac * N) samples."""
    if cfg.ensemble_m == 1:
        return fit(train, val, spec, cfg)

    n = len(train.samples)
    subset_size = int(cfg.ensemble_subset_frac * n)
    if subset_size < cfg.batch_size:
        raise ValueError(
            f"ensemble subset of {subset_size} samples is smaller than one batch ({cfg.batch_size})"
        )

    member_cfg = replace(cfg, ensemble_m=1)
    ss = np.random.SeedSequence(cfg.seed)
    members: list[ModelParams] = []
    histories: list[list[EpochStats]] = []
    for child in ss.spawn(cfg.ensemble_m):
        subset_seed, fit_seed = (int(s.generate_state(1)[0]) for s in child.spawn(2))
        idx = np.random.default_rng(subset_seed).choice(n, size=subset_size, replace=False)
        subset = train.subset(np.sort(idx))
        model = fit(subset, val, spec, member_cfg, _seed_override=fit_seed)
        members.append(model.members[0])
        histories.append(model.histories[0])
    return TrainedModel(members=members, spec=spec, histories=histories)


def predict_batch(model: TrainedModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble-averaged (evidence_pos, evidence_neg) arrays for a batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    acc = np.zeros((x.shape[0], 2))
    for member in model.members:
        acc += forward_evidence_batch(member, x, mode="eval")
    acc /= len(model.members)
    return acc[:, 0], acc[:, 1]


def predict(model: TrainedModel, x: Sequence[float] | np.ndarray) -> BetaOpinion:
    """Opinion for one input: per-member evidence averaged, then mapped."""
    e_pos, e_neg = predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return opinion_from_evidence(Evidence(float(e_pos[0]), float(e_neg[0])))


def score_dataset(model: TrainedModel, data: Dataset) -> ScoredSet:
    """Score every sample of a dataset: probabilities, labels, uncertainties, ids."""
    e_pos, e_neg = predict_batch(model, data.features_matrix())
    e_pos = np.where(e_pos < EVIDENCE_FLOOR, 0.0, e_pos)
    e_neg = np.where(e_neg < EVIDENCE_FLOOR, 0.0, e_neg)
    total = e_pos + e_neg + 2.0
    return ScoredSet(
        scores=(e_pos + 1.0) / total,
        labels=data.labels_array(),
        uncertainties=2.0 / total,
        ids=np.array([s.id for s in data.samples]),
    )


def score_dataset_sigmoid(params: ModelParams, data: Dataset) -> ScoredSet:
    """Score a dataset with the sigmoid baseline; uncertainties are zeros."""
    scores = forward_sigmoid_batch(params, data.features_matrix())
    return ScoredSet(
        scores=scores,
        labels=data.labels_array(),
        uncertainties=np.zeros(len(scores)),
        ids=np.array([s.id for s in data.samples]),
    )


def write_history_csv(history: Sequence[EpochStats], path: str | Path) -> None:
    """Training history as CSV with columns epoch, train_loss, val_loss, lambda."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss", "lambda"])
        for row in history:
            writer.writerow(
                [row.epoch, f"{row.train_loss:.17g}", f"{row.val_loss:.17g}", f"{row.lam:.17g}"]
            )
