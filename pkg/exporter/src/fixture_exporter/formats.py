"""Emission of the engine's model JSON format plus a reference forward pass.

The file layout is stable and floats are printed as the shortest decimal
that parses back to the identical float32, so regenerating a fixture from
the same spec yields identical bytes.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.special import expit


def shortest_f32(value) -> str:
    v = np.float32(value)
    if not np.isfinite(v):
        raise ValueError("cannot serialize non-finite parameter")
    if v == 0:
        return "-0.0" if np.signbit(v) else "0.0"
    mag = abs(float(v))
    if 1e-4 <= mag < 1e16:
        return np.format_float_positional(v, unique=True, trim="0")
    return np.format_float_scientific(v, unique=True, trim="0")


def _row(values) -> str:
    return "[" + ", ".join(shortest_f32(v) for v in values) + "]"


def model_json(
    name: str,
    input_dim: int,
    layers: list[tuple[np.ndarray, np.ndarray, str]],
    lower: float = 0.0,
    upper: float = 1.0,
) -> str:
    """Serialize [(weights, bias, activation), ...] in the engine's model format."""
    parts = ["{\n"]
    parts.append('  "format_version": 1,\n')
    parts.append(f'  "name": {json.dumps(name)},\n')
    parts.append(f'  "input_dim": {input_dim},\n')
    parts.append(
        f'  "input_bounds": {{"lower": {shortest_f32(lower)}, "upper": {shortest_f32(upper)}}},\n'
    )
    parts.append('  "layers": [\n')
    for k, (W, b, act) in enumerate(layers):
        parts.append("    {\n")
        parts.append(f'      "units": {W.shape[1]},\n')
        parts.append(f'      "activation": "{act}",\n')
        parts.append('      "weights": [\n')
        parts.append(",\n".join(f"        {_row(W[r])}" for r in range(W.shape[0])))
        parts.append("\n      ],\n")
        parts.append(f'      "bias": {_row(b)}\n')
        parts.append("    }" + ("," if k < len(layers) - 1 else "") + "\n")
    parts.append("  ]\n")
    parts.append("}\n")
    return "".join(parts)


def reference_logits(layers: list[tuple[np.ndarray, np.ndarray, str]], X: np.ndarray) -> np.ndarray:
    """Float32 forward pass used for the sidecar's reference outputs."""
    a = np.asarray(X, dtype=np.float32)
    for W, b, act in layers:
        z = a @ W + b
        if act == "relu":
            a = np.maximum(z, 0)
        elif act == "sigmoid":
            a = expit(z)
        elif act == "identity":
            a = z
        else:
            raise ValueError(f"unknown activation {act!r}")
    return a


def sidecar_json(accuracy: float, sample_logits: np.ndarray) -> str:
    doc = {
        "accuracy": float(accuracy),
        "sample_logits": [[float(v) for v in row] for row in sample_logits],
    }
    return json.dumps(doc, indent=2) + "\n"
