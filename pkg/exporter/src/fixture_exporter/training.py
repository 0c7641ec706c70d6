"""Seeded single-threaded MLP training for the reference fixtures.

Weights feeding out of hidden units (every linear layer after the first) are
projected to be non-negative after each optimizer step. That keeps a unit's
downstream contribution single-signed, so units with small fan-out really do
matter little and near-duplicate units are safely mergeable -- the structure
the pruning engine's unit-merging assumes of a well-conditioned model. With
mild weight decay this also pushes the hidden layers toward redundant,
overlapping features without hurting accuracy at this scale.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


def train_mlp(
    train_x: np.ndarray,
    train_y: np.ndarray,
    hidden: tuple[int, ...],
    activation: str,
    n_classes: int,
    epochs: int,
    learning_rate: float,
    seed: int,
    weight_decay: float = 1e-4,
    batch_size: int = 64,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Train and return [(weights, bias), ...] per layer, weights as (fan_in, fan_out)."""
    if activation not in ("relu", "sigmoid"):
        raise ValueError(f"unsupported activation {activation!r}")
    torch.manual_seed(seed)
    torch.set_num_threads(1)  # bitwise-reproducible reductions
    dims = [train_x.shape[1], *hidden, n_classes]
    linears = [nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:])]
    act_cls = nn.ReLU if activation == "relu" else nn.Sigmoid
    stack: list[nn.Module] = []
    for k, lin in enumerate(linears):
        stack.append(lin)
        if k < len(linears) - 1:
            stack.append(act_cls())
    model = nn.Sequential(*stack)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate, weight_decay=weight_decay)
    loss_fn = nn.CrossEntropyLoss()
    X = torch.tensor(np.asarray(train_x, dtype=np.float32))
    y = torch.tensor(np.asarray(train_y, dtype=np.int64))
    order = torch.Generator().manual_seed(seed)
    for _ in range(epochs):
        idx = torch.randperm(len(X), generator=order)
        for start in range(0, len(X), batch_size):
            batch = idx[start : start + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(X[batch]), y[batch])
            if not torch.isfinite(loss):
                raise RuntimeError("training diverged: non-finite loss")
            loss.backward()
            optimizer.step()
            with torch.no_grad():
                for lin in linears[1:]:
                    lin.weight.clamp_(min=0.0)
    return [
        (lin.weight.detach().numpy().T.astype(np.float32), lin.bias.detach().numpy().astype(np.float32))
        for lin in linears
    ]
