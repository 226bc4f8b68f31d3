"""Small feedforward network producing per-class evidence, plus a sigmoid baseline.

Hidden layers are ReLU with optional inverted dropout after each one. The
evidential head has two outputs mapped to nonnegative evidence by ReLU or
softplus; the sigmoid head has one output and trains with binary cross
entropy (the comparison baseline).

Checkpoint format (version 1): a JSON object
    {"format": "evibeta-checkpoint", "version": 1,
     "spec": {input_dim, hidden_layers, dropout_rate, evidence_activation, head},
     "seed": int,
     "weights": [[row-major floats] per layer],
     "biases": [[floats] per layer]}
Floats are serialized with repr precision, so save/load round-trips are
bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .evidential import AnnealedWeight, Evidence, LabeledTarget, RegMode, batch_loss_and_grad

__all__ = [
    "NetworkSpec",
    "ModelParams",
    "Gradients",
    "init_params",
    "forward_evidence",
    "forward_evidence_batch",
    "forward_sigmoid_baseline",
    "backward",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT = "evibeta-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_layers: tuple[int, ...] = (16,)
    dropout_rate: float = 0.0
    evidence_activation: Literal["relu", "softplus"] = "relu"
    head: Literal["evidential", "sigmoid"] = "evidential"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(width < 1 for width in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.evidence_activation not in ("relu", "softplus"):
            raise ValueError(f"unknown evidence_activation {self.evidence_activation!r}")
        if self.head not in ("evidential", "sigmoid"):
            raise ValueError(f"unknown head {self.head!r}")
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))

    @property
    def output_dim(self) -> int:
        return 2 if self.head == "evidential" else 1

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_layers, self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))


@dataclass
class ModelParams:
    """Per-layer weights/biases together with the spec they instantiate."""

    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int

    def copy(self) -> "ModelParams":
        return ModelParams(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            seed=self.seed,
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """Fan-in-scaled uniform weights, zero biases, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims:
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(spec=spec, weights=weights, biases=biases, seed=seed)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(
    params: ModelParams,
    x: np.ndarray,
    dropout_rng: np.random.Generator | None,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray], list[np.ndarray | None]]:
    """Run the trunk and return (final pre-activation, inputs, pre-acts, masks)."""
    spec = params.spec
    n_hidden = len(spec.hidden_layers)
    layer_inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    h = x
    for i in range(n_hidden):
        layer_inputs.append(h)
        z = h @ params.weights[i] + params.biases[i]
        pre_acts.append(z)
        h = np.maximum(z, 0.0)
        if dropout_rng is not None and spec.dropout_rate > 0.0:
            keep = 1.0 - spec.dropout_rate
            mask = (dropout_rng.random(h.shape) >= spec.dropout_rate) / keep
            h = h * mask
            masks.append(mask)
        else:
            masks.append(None)
    layer_inputs.append(h)
    z_out = h @ params.weights[n_hidden] + params.biases[n_hidden]
    return z_out, layer_inputs, pre_acts, masks


def _evidence_from_logits(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return _softplus(z)


def _evidence_activation_grad(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(float)
    return _sigmoid(z)


def forward_evidence_batch(
    params: ModelParams,
    x: np.ndarray,
    mode: Literal["train", "eval"] = "eval",
    dropout_seed: int | None = None,
) -> np.ndarray:
    """Evidence for a batch of inputs, shape (n, 2). Eval mode is deterministic."""
    spec = params.spec
    if spec.head != "evidential":
        raise ValueError("forward_evidence requires an evidential head")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"expected input dim {spec.input_dim}, got {x.shape[1]}")
    rng = None
    if mode == "train":
        if dropout_seed is None:
            raise ValueError("train mode requires a dropout_seed")
        rng = np.random.default_rng(dropout_seed)
    z_out, _, _, _ = _forward(params, x, rng)
    return _evidence_from_logits(z_out, spec.evidence_activation)


def forward_evidence(
    params: ModelParams,
    x: Sequence[float] | np.ndarray,
    mode: Literal["train", "eval"] = "eval",
    dropout_seed: int | None = None,
) -> Evidence:
    """Evidence for a single input vector."""
    ev = forward_evidence_batch(params, np.asarray(x, dtype=float).reshape(1, -1), mode, dropout_seed)
    return Evidence(float(ev[0, 0]), float(ev[0, 1]))


def forward_sigmoid_baseline(params: ModelParams, x: Sequence[float] | np.ndarray) -> float:
    """Probability output of the sigmoid-head baseline, eval mode."""
    spec = params.spec
    if spec.head != "sigmoid":
        raise ValueError("forward_sigmoid_baseline requires a sigmoid head")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"expected input dim {spec.input_dim}, got {x.shape[1]}")
    z_out, _, _, _ = _forward(params, x, None)
    return float(_sigmoid(z_out)[0, 0])


def forward_sigmoid_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    if params.spec.head != "sigmoid":
        raise ValueError("sigmoid forward requires a sigmoid head")
    z_out, _, _, _ = _forward(params, np.atleast_2d(np.asarray(x, dtype=float)), None)
    return _sigmoid(z_out)[:, 0]


def backward(
    params: ModelParams,
    batch: Sequence[tuple[np.ndarray, LabeledTarget]] | tuple[np.ndarray, np.ndarray],
    w: AnnealedWeight,
    mode: Literal["train", "eval"] = "eval",
    dropout_seed: int | None = None,
    reg_mode: RegMode = "assigned",
) -> tuple[Gradients, float]:
    """Backprop of the mean per-sample loss over a batch.

    Evidential head: data + annealed KL loss. Sigmoid head: binary cross
    entropy (w is ignored). The batch is either a sequence of
    (input, LabeledTarget) pairs or a pre-stacked (X, y) array pair.
    Dropout masks are sampled once and shared between the internal forward
    pass and the returned gradients. Returns (gradients, mean loss).
    """
    if isinstance(batch, tuple):
        x, y = batch
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
    else:
        if len(batch) == 0:
            raise ValueError("batch must be nonempty")
        x = np.stack([np.asarray(xi, dtype=float) for xi, _ in batch])
        y = np.array([float(t.label) for _, t in batch])
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")

    spec = params.spec
    rng = None
    if mode == "train":
        if dropout_seed is None:
            raise ValueError("train mode requires a dropout_seed")
        rng = np.random.default_rng(dropout_seed)

    z_out, layer_inputs, pre_acts, masks = _forward(params, x, rng)
    n = x.shape[0]

    if spec.head == "evidential":
        evidence = _evidence_from_logits(z_out, spec.evidence_activation)
        losses, g_pos, g_neg = batch_loss_and_grad(
            evidence[:, 0], evidence[:, 1], y, w.lambda_now, reg_mode
        )
        d_evidence = np.stack([g_pos, g_neg], axis=1)
        delta = d_evidence * _evidence_activation_grad(z_out, spec.evidence_activation)
        mean_loss = float(losses.mean())
    else:
        p = _sigmoid(z_out)[:, 0]
        eps = 1e-12
        losses = -(y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps))
        delta = (p - y)[:, None]
        mean_loss = float(losses.mean())

    delta = delta / n
    n_layers = len(params.weights)
    grad_w = [np.zeros_like(wm) for wm in params.weights]
    grad_b = [np.zeros_like(b) for b in params.biases]
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = layer_inputs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            if masks[i - 1] is not None:
                delta = delta * masks[i - 1]
            delta = delta * (pre_acts[i - 1] > 0.0)

    return Gradients(weights=grad_w, biases=grad_b), mean_loss


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Write a version-1 JSON checkpoint (see module docstring for layout)."""
    spec = params.spec
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "hidden_layers": list(spec.hidden_layers),
            "dropout_rate": spec.dropout_rate,
            "evidence_activation": spec.evidence_activation,
            "head": spec.head,
        },
        "seed": params.seed,
        "weights": [w.flatten().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> ModelParams:
    """Load a checkpoint written by `save_checkpoint`; round trip is lossless."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    s = payload["spec"]
    spec = NetworkSpec(
        input_dim=s["input_dim"],
        hidden_layers=tuple(s["hidden_layers"]),
        dropout_rate=s["dropout_rate"],
        evidence_activation=s["evidence_activation"],
        head=s["head"],
    )
    weights = [
        np.array(flat, dtype=float).reshape(dims)
        for flat, dims in zip(payload["weights"], spec.layer_dims)
    ]
    biases = [np.array(b, dtype=float) for b in payload["biases"]]
    return ModelParams(spec=spec, weights=weights, biases=biases, seed=payload["seed"])
