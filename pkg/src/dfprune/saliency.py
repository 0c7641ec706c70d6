"""Pairwise unit-replaceability scoring and per-layer candidate ordering.

For a (nominee, delegate) pair in the same layer the score combines the
nominee's mean outgoing weight with how different the two units' incoming
parameters are. A low score marks a nominee whose removal, with its outgoing
weights folded into the delegate, should barely move the next layer. The
score is asymmetric in the two roles and may be negative; ordering is by
plain ascending value with a deterministic index tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Network

BIAS_EPS = 1e-12
DENOMINATORS = ("count", "l1")


@dataclass(frozen=True)
class CandidatePair:
    layer: int
    nominee: int
    delegate: int
    saliency: float


def _check_pair(net: Network, layer: int, i: int, j: int) -> None:
    if not 0 <= layer < len(net.layers) - 1:
        raise ValueError(f"layer {layer} is not a prunable hidden layer")
    units = net.layers[layer].units
    if not (0 <= i < units and 0 <= j < units):
        raise ValueError(f"unit index out of range for layer {layer} of width {units}")
    if i == j:
        raise ValueError("nominee and delegate must differ")
    alive = net.layers[layer].alive
    if not (alive[i] and alive[j]):
        raise ValueError(f"unit pair ({i}, {j}) at layer {layer} involves a dead unit")


def _outgoing_factor(out_row: np.ndarray, denominator: str) -> float:
    total = float(out_row.sum())
    if denominator == "count":
        return total / out_row.size
    if denominator == "l1":
        scale = float(np.abs(out_row).sum())
        return total / scale if scale > 0 else 0.0
    raise ValueError(f"denominator must be one of {DENOMINATORS}")


def saliency(net: Network, layer: int, i: int, j: int, denominator: str = "count") -> float:
    """Replaceability score of nominee ``i`` with respect to delegate ``j``."""
    _check_pair(net, layer, i, j)
    w_in = net.layers[layer].weights.astype(np.float64)
    b = net.layers[layer].bias.astype(np.float64)
    out_row = net.layers[layer + 1].weights[i, :].astype(np.float64)
    factor = _outgoing_factor(out_row, denominator)
    d = w_in[:, i] - w_in[:, j]
    column_term = float(np.sqrt(np.dot(d, d)))
    bias_term = abs(b[i] - b[j]) / (abs(b[i] + b[j]) + BIAS_EPS)
    return float(factor * (column_term + bias_term))


def saliency_list(net: Network, layer: int, denominator: str = "count") -> list[CandidatePair]:
    """All ordered (nominee, delegate) pairs over alive units, sorted ascending.

    Ties break on (nominee, delegate) index so identical network state always
    yields the identical list.
    """
    if not 0 <= layer < len(net.layers) - 1:
        raise ValueError(f"layer {layer} is not a prunable hidden layer")
    alive = np.flatnonzero(net.layers[layer].alive)
    if alive.size < 2:
        raise ValueError(f"layer {layer} has fewer than 2 alive units; nothing to pair")
    w_in = net.layers[layer].weights.astype(np.float64)
    b = net.layers[layer].bias.astype(np.float64)
    w_out = net.layers[layer + 1].weights.astype(np.float64)
    # Same arithmetic as saliency(), hoisted out of the pair loop.
    factors = {int(i): _outgoing_factor(w_out[i, :], denominator) for i in alive}
    pairs = []
    for i in alive:
        for j in alive:
            if i == j:
                continue
            d = w_in[:, i] - w_in[:, j]
            column_term = float(np.sqrt(np.dot(d, d)))
            bias_term = abs(b[i] - b[j]) / (abs(b[i] + b[j]) + BIAS_EPS)
            pairs.append(
                CandidatePair(layer, int(i), int(j), float(factors[int(i)] * (column_term + bias_term)))
            )
    pairs.sort(key=lambda p: (p.saliency, p.nominee, p.delegate))
    return pairs
