"""Accuracy, FGSM adversarial crafting via exact input gradients, robustness counting.

The loss is softmax cross-entropy over the network's output logits for every
class count, including 2-logit binary heads. Gradients are computed in
reverse mode at 64-bit precision. An input counts as robust when the model
under evaluation classifies both the clean and the adversarial variant
correctly and consistently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .model import LabeledDataset, Network, forward, forward_trace

REPORT_COLUMNS = (
    "model",
    "sparsity",
    "epsilon",
    "acc_orig",
    "acc_pruned",
    "robust_orig",
    "robust_pruned",
    "preservation",
    "topk",
    "n",
)


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    clip: bool = True
    craft_on: str = "pruned"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.craft_on not in ("original", "pruned"):
            raise ValueError(f"craft_on must be 'original' or 'pruned', got {self.craft_on!r}")


@dataclass(frozen=True)
class EvalReport:
    accuracy_orig: float
    accuracy_pruned: float
    robust_count_orig: int
    robust_count_pruned: int
    robustness_preservation_ratio: float
    topk_preservation: Optional[float]
    n_samples: int
    epsilon: float
    degenerate_pruned: bool = False


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _activation_derivative(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    if kind == "sigmoid":
        s = expit(z)
        return s * (1.0 - s)
    if kind == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


def loss_gradient_wrt_input(net: Network, x, y) -> np.ndarray:
    """Exact gradient of softmax cross-entropy at (x, y) with respect to x.

    Accepts a single vector with an integer label or a batch with a label
    vector; returns gradients with matching shape.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = np.atleast_2d(arr)
    labels = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if labels.shape[0] != X.shape[0]:
        raise ValueError("label count does not match sample count")
    if labels.size and not (0 <= labels.min() and labels.max() < net.output_dim):
        raise ValueError("label out of range for the network's output width")
    pre, _ = forward_trace(net, X, dtype=np.float64)
    probs = _softmax(_apply_output(net, pre))
    grad_out = probs
    grad_out[np.arange(X.shape[0]), labels] -= 1.0
    g = grad_out
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        dz = g * _activation_derivative(layer.activation, pre[idx]) * layer.alive
        g = dz @ layer.weights.astype(np.float64).T
    if not np.isfinite(g).all():
        raise ArithmeticError("non-finite gradient")
    return g[0] if single else g


def _apply_output(net: Network, pre: list[np.ndarray]) -> np.ndarray:
    # Logits are the output layer's (masked) activation image of its pre-activations.
    last = net.layers[-1]
    z = pre[-1]
    if last.activation == "relu":
        return np.maximum(z, 0)
    if last.activation == "sigmoid":
        return expit(z)
    return z


def fgsm(net: Network, x, y, cfg: AttackConfig) -> np.ndarray:
    """Craft x + epsilon * sign(grad loss), optionally clipped to the input box."""
    width = float((net.input_upper.astype(np.float64) - net.input_lower).max())
    if cfg.epsilon > width:
        raise ValueError(f"epsilon {cfg.epsilon} exceeds the input range width {width}")
    g = loss_gradient_wrt_input(net, x, y)
    adv = np.asarray(x, dtype=np.float64) + cfg.epsilon * np.sign(g)
    if cfg.clip:
        adv = np.clip(adv, net.input_lower.astype(np.float64), net.input_upper.astype(np.float64))
    return adv.astype(np.float32)


def _predictions(net: Network, samples: np.ndarray) -> np.ndarray:
    # np.argmax resolves ties at the lowest class index, which keeps counts reproducible.
    return np.argmax(forward(net, samples), axis=1)


def accuracy(net: Network, ds: LabeledDataset) -> float:
    """Fraction of argmax-correct predictions."""
    return float((_predictions(net, ds.samples) == ds.labels).mean())


def robust_count(f: Network, g: Network, ds: LabeledDataset, cfg: AttackConfig) -> int:
    """Number of inputs the evaluated model ``g`` classifies correctly and
    consistently under attack: argmax g(x_adv) == argmax g(x) == y.

    The adversarial inputs are crafted against ``f`` or ``g`` per
    ``cfg.craft_on``; with g == f this measures the unpruned model itself.
    """
    if f.input_dim != g.input_dim or f.output_dim != g.output_dim:
        raise ValueError("models must share input and output dimensions")
    if ds.samples.shape[1] != g.input_dim:
        raise ValueError("dataset feature count does not match the model input")
    craft_net = f if cfg.craft_on == "original" else g
    adv = fgsm(craft_net, ds.samples, ds.labels, cfg)
    clean_pred = _predictions(g, ds.samples)
    adv_pred = _predictions(g, adv)
    return int(((adv_pred == clean_pred) & (clean_pred == ds.labels)).sum())


def topk_preservation(f: Network, g: Network, ds: LabeledDataset, k: int = 3) -> float:
    """Fraction of samples whose top-k class set matches between the two models."""
    if k > f.output_dim:
        raise ValueError(f"k={k} exceeds the class count {f.output_dim}")
    top_f = np.sort(np.argsort(-forward(f, ds.samples), axis=1, kind="stable")[:, :k], axis=1)
    top_g = np.sort(np.argsort(-forward(g, ds.samples), axis=1, kind="stable")[:, :k], axis=1)
    return float((top_f == top_g).all(axis=1).mean())


def evaluate_pair(
    f: Network,
    g: Network,
    ds: LabeledDataset,
    cfg: AttackConfig,
    topk: Optional[int] = None,
) -> EvalReport:
    """Full original-vs-pruned comparison for one attack budget."""
    robust_orig = robust_count(f, f, ds, cfg)
    robust_pruned = robust_count(f, g, ds, cfg)
    preds_pruned = _predictions(g, ds.samples)
    return EvalReport(
        accuracy_orig=accuracy(f, ds),
        accuracy_pruned=float((preds_pruned == ds.labels).mean()),
        robust_count_orig=robust_orig,
        robust_count_pruned=robust_pruned,
        robustness_preservation_ratio=robust_pruned / max(robust_orig, 1),
        topk_preservation=topk_preservation(f, g, ds, topk) if topk else None,
        n_samples=len(ds),
        epsilon=cfg.epsilon,
        degenerate_pruned=bool(len(ds) > 1 and (preds_pruned == preds_pruned[0]).all()),
    )


def report_row(model: str, sparsity: float, rep: EvalReport) -> list[str]:
    return [
        model,
        repr(float(sparsity)),
        repr(float(rep.epsilon)),
        repr(float(rep.accuracy_orig)),
        repr(float(rep.accuracy_pruned)),
        str(rep.robust_count_orig),
        str(rep.robust_count_pruned),
        repr(float(rep.robustness_preservation_ratio)),
        "" if rep.topk_preservation is None else repr(float(rep.topk_preservation)),
        str(rep.n_samples),
    ]


def write_reports(path, rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)
