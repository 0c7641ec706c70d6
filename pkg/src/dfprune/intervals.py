"""Interval arithmetic over network activations and pruning-impact propagation.

A bounds map records, for every unit, an interval guaranteed to contain its
pre- and post-activation value for any input inside the network's input box.
Merging a unit pair perturbs the next layer's pre-activations by a computable
interval; that perturbation is pushed forward layer by layer to the output,
yielding an interval estimate of how much the edit can move each logit.

All interval computation runs at 64-bit precision regardless of the stored
parameter precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .model import Network

MAGNITUDE_LIMIT = 1e30


class MagnitudeExplosionError(RuntimeError):
    """Interval bounds grew past the representable budget; results would be garbage."""

    def __init__(self, layer: int, what: str = "bounds"):
        self.layer = layer
        super().__init__(
            f"interval {what} exceeded {MAGNITUDE_LIMIT:g} in magnitude at layer {layer}; "
            "the propagated estimate is unusable for this network"
        )


class Interval(NamedTuple):
    lo: float
    hi: float


@dataclass
class IntervalVector:
    """A fixed-length vector of [lo, hi] intervals."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("lo/hi must be 1-D arrays of equal length")
        if (self.lo > self.hi).any():
            k = int(np.argmax(self.lo > self.hi))
            raise ValueError(f"inverted interval at index {k}: [{self.lo[k]}, {self.hi[k]}]")

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, idx: int) -> Interval:
        return Interval(float(self.lo[idx]), float(self.hi[idx]))

    def __add__(self, other: "IntervalVector") -> "IntervalVector":
        return IntervalVector(self.lo + other.lo, self.hi + other.hi)

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, values: np.ndarray, slack: float = 0.0) -> bool:
        v = np.asarray(values, dtype=np.float64)
        return bool(((v >= self.lo - slack) & (v <= self.hi + slack)).all())

    @classmethod
    def zeros(cls, n: int) -> "IntervalVector":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def point(cls, values) -> "IntervalVector":
        v = np.asarray(values, dtype=np.float64)
        return cls(v.copy(), v.copy())


@dataclass
class BoundsMap:
    """Per-layer pre- and post-activation intervals for a whole network."""

    input: IntervalVector
    pre: list[IntervalVector]
    post: list[IntervalVector]

    def check_compatible(self, net: Network) -> None:
        if len(self.pre) != len(net.layers) or len(self.input) != net.input_dim:
            raise ValueError("bounds map does not match network structure")
        for idx, layer in enumerate(net.layers):
            if len(self.pre[idx]) != layer.units or len(self.post[idx]) != layer.units:
                raise ValueError(f"bounds map width mismatch at layer {idx}")


def _signed_matmul(lo: np.ndarray, hi: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Exact interval image of x @ W: negative weights swap the contributing bound.
    pos = np.maximum(W, 0.0)
    neg = np.minimum(W, 0.0)
    return lo @ pos + hi @ neg, hi @ pos + lo @ neg


def interval_affine(W, b, iv: IntervalVector) -> IntervalVector:
    """Interval image of the affine map iv @ W + b."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != len(iv):
        raise ValueError(f"weight shape {W.shape} incompatible with interval vector of length {len(iv)}")
    if b.shape != (W.shape[1],):
        raise ValueError("bias length mismatch")
    lo, hi = _signed_matmul(iv.lo, iv.hi, W)
    return IntervalVector(lo + b, hi + b)


def interval_activation(kind: str, iv: IntervalVector) -> IntervalVector:
    """Elementwise activation image; exact because all supported kinds are monotone."""
    if kind == "relu":
        return IntervalVector(np.maximum(iv.lo, 0.0), np.maximum(iv.hi, 0.0))
    if kind == "sigmoid":
        return IntervalVector(expit(iv.lo), expit(iv.hi))
    if kind == "identity":
        return IntervalVector(iv.lo.copy(), iv.hi.copy())
    raise ValueError(f"unknown activation {kind!r}")


def _check_magnitude(iv: IntervalVector, layer: int, what: str) -> None:
    worst = max(np.abs(iv.lo).max(initial=0.0), np.abs(iv.hi).max(initial=0.0))
    if not np.isfinite(worst) or worst > MAGNITUDE_LIMIT:
        raise MagnitudeExplosionError(layer, what)


def _layer_bounds(layer, incoming: IntervalVector, idx: int) -> tuple[IntervalVector, IntervalVector]:
    pre = interval_affine(layer.weights, layer.bias, incoming)
    _check_magnitude(pre, idx, "bounds")
    act = interval_activation(layer.activation, pre)
    # Dead units output exactly zero (masked inference), whatever the activation says.
    alive = layer.alive
    post = IntervalVector(np.where(alive, act.lo, 0.0), np.where(alive, act.hi, 0.0))
    return pre, post


def build_bounds_map(net: Network) -> BoundsMap:
    """Propagate the input box through every layer, recording pre/post intervals."""
    box = IntervalVector(
        np.asarray(net.input_lower, dtype=np.float64),
        np.asarray(net.input_upper, dtype=np.float64),
    )
    pre_list, post_list = [], []
    cur = box
    for idx, layer in enumerate(net.layers):
        pre, post = _layer_bounds(layer, cur, idx)
        pre_list.append(pre)
        post_list.append(post)
        cur = post
    return BoundsMap(input=box, pre=pre_list, post=post_list)


def refresh_bounds(net: Network, bounds: BoundsMap, from_layer: int) -> BoundsMap:
    """Recompute intervals from ``from_layer`` to the output; earlier layers are reused."""
    bounds.check_compatible(net)
    if not 0 <= from_layer < len(net.layers):
        raise ValueError(f"from_layer {from_layer} out of range")
    pre_list = list(bounds.pre[:from_layer])
    post_list = list(bounds.post[:from_layer])
    cur = bounds.input if from_layer == 0 else post_list[-1]
    for idx in range(from_layer, len(net.layers)):
        pre, post = _layer_bounds(net.layers[idx], cur, idx)
        pre_list.append(pre)
        post_list.append(post)
        cur = post
    return BoundsMap(input=bounds.input, pre=pre_list, post=post_list)


def pruning_impact(net: Network, bounds: BoundsMap, layer: int, i: int, j: int) -> IntervalVector:
    """Interval perturbation of layer ``layer+1`` pre-activations caused by merging
    unit ``i`` of ``layer`` into delegate ``j`` (per next-layer unit k:
    ``w[i,k] * (a_j - a_i)`` with the unit valuations read from the bounds map)."""
    bounds.check_compatible(net)
    if not 0 <= layer < len(net.layers) - 1:
        raise ValueError(f"layer {layer} is not a prunable hidden layer")
    cur = net.layers[layer]
    if i == j or not (0 <= i < cur.units and 0 <= j < cur.units):
        raise ValueError(f"invalid unit pair ({i}, {j}) at layer {layer}")
    if not (cur.alive[i] and cur.alive[j]):
        raise ValueError(f"unit pair ({i}, {j}) at layer {layer} involves a dead unit")
    post = bounds.post[layer]
    diff_lo = post.lo[j] - post.hi[i]
    diff_hi = post.hi[j] - post.lo[i]
    w = net.layers[layer + 1].weights[i, :].astype(np.float64)
    lo = np.where(w >= 0, w * diff_lo, w * diff_hi)
    hi = np.where(w >= 0, w * diff_hi, w * diff_lo)
    return IntervalVector(lo, hi)


def _relu_shift_range(zl, zh, dl, dh):
    # Range of relu(z+d) - relu(z) over the box: monotone in both arguments,
    # so the bound endpoints delimit it exactly.
    def g(z, d):
        return np.maximum(z + d, 0.0) - np.maximum(z, 0.0)

    lo = np.minimum(g(zl, dl), g(zh, dl))
    hi = np.maximum(g(zl, dh), g(zh, dh))
    return lo, hi


def _sigmoid_shift_range(zl, zh, dl, dh):
    # Range of sigmoid(z+d) - sigmoid(z): monotone in d; in z the difference has a
    # single interior extremum at z = -d/2 (a maximum for d>0, a minimum for d<0).
    def g(z, d):
        return expit(z + d) - expit(z)

    lo = np.minimum(g(zl, dl), g(zh, dl))
    crit = -dl / 2.0
    inside = (dl < 0) & (zl <= crit) & (crit <= zh)
    lo = np.where(inside, np.minimum(lo, expit(dl / 2.0) - expit(-dl / 2.0)), lo)

    hi = np.maximum(g(zl, dh), g(zh, dh))
    crit = -dh / 2.0
    inside = (dh > 0) & (zl <= crit) & (crit <= zh)
    hi = np.where(inside, np.maximum(hi, expit(dh / 2.0) - expit(-dh / 2.0)), hi)
    return lo, hi


def _activation_shift(kind: str, pre: IntervalVector, delta: IntervalVector) -> IntervalVector:
    """Exact interval range of act(z + d) - act(z) for z in ``pre``, d in ``delta``.

    The two occurrences of z are the same value, so this is strictly tighter
    than subtracting the two activation images as independent intervals; a
    zero perturbation maps to a zero output change.
    """
    if kind == "identity":
        return IntervalVector(delta.lo.copy(), delta.hi.copy())
    if kind == "relu":
        lo, hi = _relu_shift_range(pre.lo, pre.hi, delta.lo, delta.hi)
    elif kind == "sigmoid":
        lo, hi = _sigmoid_shift_range(pre.lo, pre.hi, delta.lo, delta.hi)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return IntervalVector(lo, hi)


def propagate_impact(net: Network, bounds: BoundsMap, layer: int, impact: IntervalVector) -> IntervalVector:
    """Push a pre-activation perturbation at ``layer`` forward to the output layer.

    At each layer the perturbation is converted to a post-activation change via
    the activation-shift range around the stored pre-activation bounds, then
    mapped through the next weight matrix (biases cancel in differences).
    Returns the interval change of each output-layer value.
    """
    bounds.check_compatible(net)
    if not 0 <= layer < len(net.layers):
        raise ValueError(f"layer {layer} out of range")
    if len(impact) != net.layers[layer].units:
        raise ValueError("impact vector length does not match layer width")
    last = len(net.layers) - 1
    delta = impact
    for m in range(layer, last + 1):
        lyr = net.layers[m]
        shift = _activation_shift(lyr.activation, bounds.pre[m], delta)
        alive = lyr.alive
        shift = IntervalVector(np.where(alive, shift.lo, 0.0), np.where(alive, shift.hi, 0.0))
        _check_magnitude(shift, m, "impact")
        if m == last:
            return shift
        lo, hi = _signed_matmul(shift.lo, shift.hi, net.layers[m + 1].weights.astype(np.float64))
        delta = IntervalVector(lo, hi)
    raise AssertionError("unreachable")
