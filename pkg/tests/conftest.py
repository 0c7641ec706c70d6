from pathlib import Path

import numpy as np
import pytest

from dfprune.model import DenseLayer, Network, load_dataset, load_network

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
DATA = Path(__file__).resolve().parent / "data"


def make_net(dims, activations, seed=0, scale=1.0, lower=0.0, upper=1.0):
    """Random dense network with the given layer widths and activations."""
    rng = np.random.default_rng(seed)
    layers = []
    for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        layers.append(
            DenseLayer(
                weights=(scale * rng.normal(size=(a, b))).astype(np.float32),
                bias=(scale * rng.normal(size=b)).astype(np.float32),
                activation=activations[k],
            )
        )
    return Network(
        input_dim=dims[0],
        layers=layers,
        input_lower=np.full(dims[0], lower, dtype=np.float32),
        input_upper=np.full(dims[0], upper, dtype=np.float32),
    )


def box_samples(net, n, seed=0):
    rng = np.random.default_rng(seed)
    lo = net.input_lower.astype(np.float64)
    hi = net.input_upper.astype(np.float64)
    return rng.uniform(lo, hi, size=(n, net.input_dim)).astype(np.float32)


def golden_network():
    """Deterministic net exercising dead units, per-feature bounds, and tiny values."""
    w0 = np.array([[0.5, -1.25, 0.0], [0.125, 2.0, 0.0]], dtype=np.float32)
    b0 = np.array([0.1, -0.2, 0.0], dtype=np.float32)
    w1 = np.array([[1.0, -2.5e-7], [0.25, 3.0], [0.0, 0.0]], dtype=np.float32)
    b1 = np.array([0.0, 1.5], dtype=np.float32)
    return Network(
        input_dim=2,
        layers=[
            DenseLayer(w0, b0, "relu", alive=np.array([True, True, False])),
            DenseLayer(w1, b1, "identity"),
        ],
        input_lower=np.array([0.0, -1.0], dtype=np.float32),
        input_upper=np.array([1.0, 2.0], dtype=np.float32),
        name="golden",
    )


@pytest.fixture(scope="session")
def digits_net():
    return load_network(FIXTURES / "mlp_8x8digits.json")


@pytest.fixture(scope="session")
def sigmoid_net():
    return load_network(FIXTURES / "mlp_8x8digits_sigmoid.json")


@pytest.fixture(scope="session")
def wide_net():
    return load_network(FIXTURES / "mlp_8x8digits_wide.json")


@pytest.fixture(scope="session")
def synthbin_net():
    return load_network(FIXTURES / "mlp_synthbin.json")


@pytest.fixture(scope="session")
def digits_ds():
    return load_dataset(FIXTURES / "digits_test.nnds")


@pytest.fixture(scope="session")
def synthbin_ds():
    return load_dataset(FIXTURES / "synthbin_test.nnds")
