"""Dense-network representation, portable file formats, inference, and compaction.

Model file format (UTF-8 JSON, ``format_version`` 1)::

    {
      "format_version": 1,
      "name": "...",                      # optional
      "input_dim": N,
      "input_bounds": {"lower": L, "upper": U},   # scalars or arrays of length N
      "layers": [
        {"units": M, "activation": "relu"|"sigmoid"|"identity",
         "weights": [[...], ...],         # fan_in rows x fan_out columns
         "bias": [...],
         "alive": [true, ...]}            # optional, default all true
      ]
    }

Numbers are decimal literals; parameters round-trip at 32-bit precision.

Dataset file format (binary, little-endian): magic ``NNDS``, u32 version=1,
u32 n_samples, u32 n_features, u32 n_classes, then n_samples*n_features
float32 row-major, then n_samples u32 labels.

A pruned ("dead") unit is represented by masking: its incoming weights,
outgoing weights, and bias are zero and its ``alive`` flag is false. Masked
inference zeroes the unit's activation, so a masked network computes the
same function as its physically compacted counterpart.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("relu", "sigmoid", "identity")
FORMAT_VERSION = 1
NNDS_MAGIC = b"NNDS"
NNDS_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class ModelFormatError(ValueError):
    """A model file or in-memory network violates the format contract."""


class ShapeChainError(ModelFormatError):
    """Adjacent layer dimensions do not chain (fan_out(l) != fan_in(l+1))."""


class DatasetFormatError(ValueError):
    """A dataset file violates the binary format."""


@dataclass
class DenseLayer:
    """One fully connected layer: ``weights[i][j]`` connects input unit i to unit j."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str
    alive: np.ndarray = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.alive is None:
            self.alive = np.ones(self.weights.shape[1], dtype=bool)
        else:
            self.alive = np.asarray(self.alive, dtype=bool)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def units(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation, self.alive.copy())


@dataclass
class Network:
    """An ordered stack of dense layers plus the box of legitimate inputs."""

    input_dim: int
    layers: list[DenseLayer]
    input_lower: np.ndarray = None
    input_upper: np.ndarray = None
    name: str = ""
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.input_lower is None:
            self.input_lower = np.zeros(self.input_dim, dtype=np.float32)
        if self.input_upper is None:
            self.input_upper = np.ones(self.input_dim, dtype=np.float32)
        self.input_lower = np.asarray(self.input_lower, dtype=np.float32)
        self.input_upper = np.asarray(self.input_upper, dtype=np.float32)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].units

    @property
    def hidden_indices(self) -> range:
        return range(len(self.layers) - 1)

    def alive_hidden_units(self) -> int:
        return int(sum(int(l.alive.sum()) for l in self.layers[:-1]))

    def total_hidden_units(self) -> int:
        return int(sum(l.units for l in self.layers[:-1]))

    def copy(self) -> "Network":
        return Network(
            input_dim=self.input_dim,
            layers=[l.copy() for l in self.layers],
            input_lower=self.input_lower.copy(),
            input_upper=self.input_upper.copy(),
            name=self.name,
            format_version=self.format_version,
        )


@dataclass
class LabeledDataset:
    """Input matrix with integer class labels."""

    samples: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self) -> int:
        return self.samples.shape[0]


def validate_network(net: Network, require_hidden: bool = True) -> None:
    """Check structural invariants; raise ModelFormatError on the first violation."""
    if not net.layers:
        raise ModelFormatError("network has no layers")
    if require_hidden and len(net.layers) < 2:
        raise ModelFormatError("network needs at least one hidden layer")
    if net.input_lower.shape != (net.input_dim,) or net.input_upper.shape != (net.input_dim,):
        raise ModelFormatError("input_bounds length does not match input_dim")
    if not (np.isfinite(net.input_lower).all() and np.isfinite(net.input_upper).all()):
        raise ModelFormatError("non-finite input bounds")
    if (net.input_lower > net.input_upper).any():
        raise ModelFormatError("input lower bound exceeds upper bound")
    fan_in = net.input_dim
    last = len(net.layers) - 1
    for idx, layer in enumerate(net.layers):
        if layer.activation not in ACTIVATIONS:
            raise ModelFormatError(f"layer {idx}: unknown activation {layer.activation!r}")
        if layer.activation == "identity" and idx != last:
            raise ModelFormatError(f"layer {idx}: identity activation is only allowed on the output layer")
        if layer.weights.ndim != 2:
            raise ModelFormatError(f"layer {idx}: weights must be a matrix")
        if layer.weights.shape[0] != fan_in:
            raise ShapeChainError(
                f"layer {idx}: fan_in {layer.weights.shape[0]} does not chain with previous width {fan_in}"
            )
        if layer.units < 1:
            raise ModelFormatError(f"layer {idx}: empty layer")
        if layer.bias.shape != (layer.units,):
            raise ModelFormatError(f"layer {idx}: bias length {layer.bias.shape} != units {layer.units}")
        if layer.alive.shape != (layer.units,):
            raise ModelFormatError(f"layer {idx}: alive length mismatch")
        if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
            raise ModelFormatError(f"layer {idx}: non-finite parameter")
        if idx == last and not layer.alive.all():
            raise ModelFormatError("output layer units must not be pruned")
        dead = ~layer.alive
        if dead.any():
            if layer.weights[:, dead].any() or layer.bias[dead].any():
                raise ModelFormatError(f"layer {idx}: dead unit has non-zero incoming weights or bias")
            if idx < last and net.layers[idx + 1].weights[dead, :].any():
                raise ModelFormatError(f"layer {idx}: dead unit has non-zero outgoing weights")
        fan_in = layer.units


def _apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "sigmoid":
        return expit(z)
    if kind == "identity":
        return z
    raise ModelFormatError(f"unknown activation {kind!r}")


def forward(net: Network, x) -> np.ndarray:
    """Compute output logits for one input vector or a batch (rows = samples).

    Runs at 32-bit precision; dead units contribute exactly zero. Raises on
    dimension mismatch or a non-finite intermediate value.
    """
    arr = np.asarray(x, dtype=np.float32)
    single = arr.ndim == 1
    if single:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != net.input_dim:
        raise ValueError(f"input shape {np.shape(x)} incompatible with input_dim {net.input_dim}")
    a = arr
    for idx, layer in enumerate(net.layers):
        z = a @ layer.weights + layer.bias
        if not np.isfinite(z).all():
            raise ArithmeticError(f"non-finite pre-activation at layer {idx}")
        a = _apply_activation(layer.activation, z)
        if not layer.alive.all():
            a = a * layer.alive
    return a[0] if single else a


def forward_trace(net: Network, x, dtype=np.float64) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Run inference keeping every layer's pre- and (masked) post-activation.

    Returns ``(pre, post)`` lists of (n_samples, units) arrays, computed at
    ``dtype`` precision. Used for gradient computation and for checking
    concrete activations against interval bounds.
    """
    arr = np.atleast_2d(np.asarray(x, dtype=dtype))
    if arr.shape[1] != net.input_dim:
        raise ValueError(f"input shape {np.shape(x)} incompatible with input_dim {net.input_dim}")
    pre, post = [], []
    a = arr
    for layer in net.layers:
        z = a @ layer.weights.astype(dtype) + layer.bias.astype(dtype)
        a = _apply_activation(layer.activation, z) * layer.alive
        pre.append(z)
        post.append(a)
    return pre, post


def compact(net: Network) -> Network:
    """Physically remove dead units; the result computes the same function."""
    validate_network(net, require_hidden=False)
    layers = []
    keep_prev = np.arange(net.input_dim)
    last = len(net.layers) - 1
    for idx, layer in enumerate(net.layers):
        keep = np.flatnonzero(layer.alive) if idx < last else np.arange(layer.units)
        layers.append(
            DenseLayer(
                weights=layer.weights[np.ix_(keep_prev, keep)].copy(),
                bias=layer.bias[keep].copy(),
                activation=layer.activation,
                alive=np.ones(keep.size, dtype=bool),
            )
        )
        keep_prev = keep
    return Network(
        input_dim=net.input_dim,
        layers=layers,
        input_lower=net.input_lower.copy(),
        input_upper=net.input_upper.copy(),
        name=net.name,
        format_version=net.format_version,
    )


# --- model JSON (canonical writer: stable layout, shortest float32 decimals) ---


def format_float32(value) -> str:
    """Shortest decimal literal that parses back to the identical float32."""
    v = np.float32(value)
    if not np.isfinite(v):
        raise ModelFormatError("cannot serialize non-finite value")
    if v == 0:
        return "-0.0" if np.signbit(v) else "0.0"
    mag = abs(float(v))
    if 1e-4 <= mag < 1e16:
        return np.format_float_positional(v, unique=True, trim="0")
    return np.format_float_scientific(v, unique=True, trim="0")


def _float_row(values: np.ndarray) -> str:
    return "[" + ", ".join(format_float32(v) for v in values) + "]"


def _network_to_json(net: Network) -> str:
    out = []
    out.append("{\n")
    out.append(f'  "format_version": {net.format_version},\n')
    if net.name:
        out.append(f'  "name": {json.dumps(net.name)},\n')
    out.append(f'  "input_dim": {net.input_dim},\n')
    lo, hi = net.input_lower, net.input_upper
    if np.all(lo == lo[0]) and np.all(hi == hi[0]):
        bounds = f'{{"lower": {format_float32(lo[0])}, "upper": {format_float32(hi[0])}}}'
    else:
        bounds = f'{{"lower": {_float_row(lo)}, "upper": {_float_row(hi)}}}'
    out.append(f'  "input_bounds": {bounds},\n')
    out.append('  "layers": [\n')
    for idx, layer in enumerate(net.layers):
        out.append("    {\n")
        out.append(f'      "units": {layer.units},\n')
        out.append(f'      "activation": "{layer.activation}",\n')
        out.append('      "weights": [\n')
        rows = [f"        {_float_row(layer.weights[r])}" for r in range(layer.fan_in)]
        out.append(",\n".join(rows))
        out.append("\n      ],\n")
        out.append(f'      "bias": {_float_row(layer.bias)}')
        if not layer.alive.all():
            flags = ", ".join("true" if a else "false" for a in layer.alive)
            out.append(f',\n      "alive": [{flags}]\n')
        else:
            out.append("\n")
        out.append("    }" + ("," if idx < len(net.layers) - 1 else "") + "\n")
    out.append("  ]\n")
    out.append("}\n")
    return "".join(out)


def save_network(net: Network, path) -> None:
    """Write the model JSON; ``load_network`` reproduces the network bit-exactly."""
    validate_network(net, require_hidden=False)
    Path(path).write_text(_network_to_json(net), encoding="utf-8")


def _parse_bounds(raw, input_dim: int) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(raw, dict) or "lower" not in raw or "upper" not in raw:
        raise ModelFormatError('input_bounds must be {"lower": ..., "upper": ...}')
    parsed = []
    for key in ("lower", "upper"):
        v = raw[key]
        if isinstance(v, (int, float)):
            arr = np.full(input_dim, v, dtype=np.float32)
        elif isinstance(v, list):
            if len(v) != input_dim:
                raise ModelFormatError(f"input_bounds.{key} length {len(v)} != input_dim {input_dim}")
            arr = np.asarray(v, dtype=np.float32)
        else:
            raise ModelFormatError(f"input_bounds.{key} must be a number or array")
        parsed.append(arr)
    return parsed[0], parsed[1]


def load_network(path) -> Network:
    """Parse and validate a model file; reject malformed or inconsistent content."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version!r}")
    input_dim = doc.get("input_dim")
    if not isinstance(input_dim, int) or input_dim < 1:
        raise ModelFormatError("input_dim must be a positive integer")
    lower, upper = _parse_bounds(doc.get("input_bounds", {"lower": 0.0, "upper": 1.0}), input_dim)
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("layers must be a non-empty array")
    layers = []
    for idx, raw in enumerate(raw_layers):
        if not isinstance(raw, dict):
            raise ModelFormatError(f"layer {idx}: must be an object")
        try:
            weights = np.asarray(raw["weights"], dtype=np.float32)
            bias = np.asarray(raw["bias"], dtype=np.float32)
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"layer {idx}: bad weights/bias: {exc}") from exc
        units = raw.get("units")
        if weights.ndim != 2:
            raise ModelFormatError(f"layer {idx}: weights must be a matrix")
        if units is not None and units != weights.shape[1]:
            raise ModelFormatError(f"layer {idx}: units {units} != weight columns {weights.shape[1]}")
        alive = raw.get("alive")
        layers.append(DenseLayer(weights, bias, raw.get("activation", ""), alive))
    net = Network(
        input_dim=input_dim,
        layers=layers,
        input_lower=lower,
        input_upper=upper,
        name=str(doc.get("name", "")),
        format_version=version,
    )
    validate_network(net)
    return net


# --- NNDS dataset format ---


def load_dataset(path) -> LabeledDataset:
    """Parse a binary NNDS dataset file, validating header counts against payload."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DatasetFormatError("truncated header")
    magic, version, n_samples, n_features, n_classes = _HEADER.unpack_from(data, 0)
    if magic != NNDS_MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != NNDS_VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    expected = _HEADER.size + n_samples * n_features * 4 + n_samples * 4
    if len(data) != expected:
        raise DatasetFormatError(f"payload length {len(data)} != expected {expected}")
    samples = np.frombuffer(data, dtype="<f4", count=n_samples * n_features, offset=_HEADER.size)
    samples = samples.reshape(n_samples, n_features).astype(np.float32)
    labels = np.frombuffer(
        data, dtype="<u4", count=n_samples, offset=_HEADER.size + n_samples * n_features * 4
    ).astype(np.int64)
    if n_classes < 1:
        raise DatasetFormatError("n_classes must be positive")
    if n_samples and labels.max() >= n_classes:
        raise DatasetFormatError(f"label {labels.max()} out of range for {n_classes} classes")
    if not np.isfinite(samples).all():
        raise DatasetFormatError("non-finite sample value")
    return LabeledDataset(samples, labels, int(n_classes))
