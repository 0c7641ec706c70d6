"""Fixture registry and regeneration driver.

Each model fixture is one trained MLP written as engine-format JSON plus a
``.ref.json`` sidecar holding its clean test accuracy and the float32 logits
of the first 10 test samples. Dataset fixtures are NNDS files. Everything is
derived from fixed seeds; regenerating into the same directory is a no-op at
the byte level.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import digits_splits, synthetic_binary_splits, write_nnds
from .formats import model_json, reference_logits, sidecar_json
from .training import train_mlp

SIDECAR_SAMPLES = 10


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    dataset: str  # "small-digits" | "synthetic-binary"
    hidden: tuple[int, ...]
    activation: str
    epochs: int
    learning_rate: float = 1e-3
    seed: int = 7


FIXTURES = (
    FixtureSpec("mlp_8x8digits", "small-digits", (32, 32), "relu", epochs=300),
    FixtureSpec("mlp_8x8digits_sigmoid", "small-digits", (32, 32), "sigmoid", epochs=300),
    FixtureSpec("mlp_8x8digits_wide", "small-digits", (64, 64), "relu", epochs=200),
    FixtureSpec("mlp_synthbin", "synthetic-binary", (16, 16), "relu", epochs=200),
)

DATASETS = {
    "small-digits": digits_splits,
    "synthetic-binary": synthetic_binary_splits,
}

DATASET_FILES = {
    "small-digits": "digits_test.nnds",
    "synthetic-binary": "synthbin_test.nnds",
}


def _splits(dataset: str):
    try:
        return DATASETS[dataset]()
    except KeyError:
        raise ValueError(f"unknown dataset id {dataset!r}") from None


def export_model(spec: FixtureSpec, out_dir) -> tuple[Path, Path]:
    """Train one fixture and write its model JSON and reference sidecar."""
    out_dir = Path(out_dir)
    train_x, train_y, test_x, test_y = _splits(spec.dataset)
    n_classes = int(train_y.max()) + 1
    params = train_mlp(
        train_x, train_y, spec.hidden, spec.activation, n_classes,
        epochs=spec.epochs, learning_rate=spec.learning_rate, seed=spec.seed,
    )
    layers = [
        (W, b, spec.activation if k < len(params) - 1 else "identity")
        for k, (W, b) in enumerate(params)
    ]
    logits = reference_logits(layers, test_x)
    acc = float((logits.argmax(axis=1) == test_y).mean())
    model_path = out_dir / f"{spec.name}.json"
    sidecar_path = out_dir / f"{spec.name}.ref.json"
    model_path.write_text(model_json(spec.name, train_x.shape[1], layers), encoding="utf-8")
    sidecar_path.write_text(sidecar_json(acc, logits[:SIDECAR_SAMPLES]), encoding="utf-8")
    return model_path, sidecar_path


def export_dataset(dataset: str, split: str, out_dir) -> Path:
    """Write one dataset split as an NNDS file."""
    if split != "test":
        raise ValueError(f"only the test split is exported, got {split!r}")
    _, _, test_x, test_y = _splits(dataset)
    path = Path(out_dir) / DATASET_FILES[dataset]
    write_nnds(path, test_x, test_y, int(test_y.max()) + 1)
    return path


def regenerate(out_dir) -> list[Path]:
    """Rebuild every checked-in fixture into ``out_dir``; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for dataset in DATASET_FILES:
        written.append(export_dataset(dataset, "test", out_dir))
    for spec in FIXTURES:
        written.extend(export_model(spec, out_dir))
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dfprune-fixtures", description=__doc__)
    parser.add_argument("--out-dir", required=True, help="directory for the fixture files")
    args = parser.parse_args(argv)
    for path in regenerate(args.out_dir):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
