"""Deterministic desk-scale datasets, scaled into the unit box.

``small-digits`` is the 8x8 handwritten-digit set with pixel values divided
by 16; ``synthetic-binary`` is a two-Gaussian 30-feature binary problem
min-max scaled per feature. Splits are fixed permutations, so every
regeneration produces identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np
from sklearn.datasets import load_digits

DIGITS_TEST_SIZE = 360
DIGITS_SPLIT_SEED = 0
SYNTH_SEED = 11
SYNTH_TRAIN = 400
SYNTH_TEST = 200
SYNTH_FEATURES = 30

_NNDS_HEADER = struct.Struct("<4sIIII")


def digits_splits() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(train_x, train_y, test_x, test_y) for the 8x8 digits, features in [0, 1]."""
    X, y = load_digits(return_X_y=True)
    X = (X / 16.0).astype(np.float32)
    perm = np.random.default_rng(DIGITS_SPLIT_SEED).permutation(len(X))
    test, train = perm[:DIGITS_TEST_SIZE], perm[DIGITS_TEST_SIZE:]
    return X[train], y[train].astype(np.int64), X[test], y[test].astype(np.int64)


def synthetic_binary_splits() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Two overlapping 30-d Gaussian classes, min-max scaled to [0, 1] per feature."""
    rng = np.random.default_rng(SYNTH_SEED)
    n = SYNTH_TRAIN + SYNTH_TEST
    mu0 = rng.normal(0.0, 1.0, SYNTH_FEATURES)
    mu1 = mu0 + rng.normal(0.0, 1.0, SYNTH_FEATURES)
    half = n // 2
    X = np.concatenate(
        [
            rng.normal(mu0, 1.5, size=(half, SYNTH_FEATURES)),
            rng.normal(mu1, 1.5, size=(n - half, SYNTH_FEATURES)),
        ]
    )
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(n - half, dtype=np.int64)])
    lo, hi = X.min(axis=0), X.max(axis=0)
    X = ((X - lo) / (hi - lo)).astype(np.float32)
    perm = rng.permutation(n)
    X, y = X[perm], y[perm]
    return X[:SYNTH_TRAIN], y[:SYNTH_TRAIN], X[SYNTH_TRAIN:], y[SYNTH_TRAIN:]


def write_nnds(path, samples: np.ndarray, labels: np.ndarray, n_classes: int) -> None:
    """Write the binary dataset format (little-endian, float32 features, u32 labels)."""
    samples = np.ascontiguousarray(samples, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    n, d = samples.shape
    with open(path, "wb") as fh:
        fh.write(_NNDS_HEADER.pack(b"NNDS", 1, n, d, n_classes))
        fh.write(samples.tobytes())
        fh.write(labels.tobytes())
