import numpy as np
import pytest
from scipy.special import expit

from dfprune.evaluation import (
    AttackConfig,
    accuracy,
    evaluate_pair,
    fgsm,
    loss_gradient_wrt_input,
    robust_count,
    topk_preservation,
)
from dfprune.model import DenseLayer, LabeledDataset, Network, forward
from dfprune.pruning import prune_pair

from conftest import box_samples, make_net


def linear_net(W, b=None, n_out=None):
    W = np.asarray(W, dtype=np.float32)
    b = np.zeros(W.shape[1], dtype=np.float32) if b is None else np.asarray(b, dtype=np.float32)
    return Network(input_dim=W.shape[0], layers=[DenseLayer(W, b, "identity")])


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def test_gradient_zero_for_constant_network():
    net = linear_net(np.zeros((3, 2)))
    g = loss_gradient_wrt_input(net, np.array([0.2, 0.4, 0.9]), 1)
    assert np.array_equal(g, np.zeros(3))


def test_gradient_matches_closed_form_linear():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(4, 2))
    b = rng.normal(size=2)
    net = linear_net(W, b)
    x = rng.uniform(0, 1, 4)
    y = 1
    got = loss_gradient_wrt_input(net, x, y)
    W32 = net.layers[0].weights.astype(np.float64)  # parameters are stored at float32
    b32 = net.layers[0].bias.astype(np.float64)
    p = softmax(x @ W32 + b32)
    p[y] -= 1.0
    expected = p @ W32.T
    assert np.abs(got - expected).max() < 1e-10


@pytest.mark.parametrize("activation", ["relu", "sigmoid"])
def test_gradient_matches_finite_differences(activation):
    net = make_net((4, 6, 6, 3), (activation, activation, "identity"), seed=5)
    rng = np.random.default_rng(6)
    x = rng.uniform(0.1, 0.9, 4)
    y = 2

    def loss(v):
        z = np.atleast_2d(v.astype(np.float64))
        for layer in net.layers:
            z = z @ layer.weights.astype(np.float64) + layer.bias
            if layer.activation == "relu":
                z = np.maximum(z, 0)
            elif layer.activation == "sigmoid":
                z = expit(z)
        z = z[0]
        z = z - z.max()
        return -(z[y] - np.log(np.exp(z).sum()))

    got = loss_gradient_wrt_input(net, x, y)
    h = 1e-3
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fd = (loss(x + e) - loss(x - e)) / (2 * h)
        denom = max(abs(fd), abs(got[k]), 1e-6)
        assert abs(fd - got[k]) / denom < 1e-3


def test_fgsm_sign_rule_and_clip():
    # identity head, label 0: the loss gradient is negative along class-0 weights
    net = linear_net(np.array([[5.0, 0.0], [0.0, 5.0]]))
    x = np.array([0.5, 0.5], dtype=np.float32)
    cfg = AttackConfig(epsilon=0.1, clip=False)
    adv = fgsm(net, x, 0, cfg)
    assert np.allclose(adv, [0.4, 0.6], atol=1e-7)
    clipped = fgsm(net, np.array([0.05, 0.98], dtype=np.float32), 0, AttackConfig(epsilon=0.1))
    assert clipped[0] >= 0.0 and clipped[1] <= 1.0


def test_fgsm_zero_epsilon_is_identity(synthbin_net, synthbin_ds):
    adv = fgsm(synthbin_net, synthbin_ds.samples, synthbin_ds.labels, AttackConfig(epsilon=0.0))
    assert np.array_equal(adv, synthbin_ds.samples)


def test_fgsm_epsilon_budget_validated(synthbin_net, synthbin_ds):
    with pytest.raises(ValueError, match="epsilon"):
        fgsm(synthbin_net, synthbin_ds.samples, synthbin_ds.labels, AttackConfig(epsilon=1.5))


def test_fgsm_perturbation_is_exactly_epsilon_where_unclipped(digits_net, digits_ds):
    cfg = AttackConfig(epsilon=0.05, clip=False)
    adv = fgsm(digits_net, digits_ds.samples[:50], digits_ds.labels[:50], cfg)
    delta = np.abs(adv.astype(np.float64) - digits_ds.samples[:50])
    g = loss_gradient_wrt_input(digits_net, digits_ds.samples[:50], digits_ds.labels[:50])
    nonzero = g != 0
    assert np.allclose(delta[nonzero], 0.05, atol=1e-7)
    assert np.all(delta[~nonzero] == 0.0)


def test_adversarial_accuracy_below_clean(digits_net, digits_ds):
    clean = accuracy(digits_net, digits_ds)
    adv = fgsm(digits_net, digits_ds.samples, digits_ds.labels, AttackConfig(epsilon=0.05))
    attacked = float((np.argmax(forward(digits_net, adv), axis=1) == digits_ds.labels).mean())
    assert attacked < clean


def test_robust_count_equals_correct_count_at_zero_epsilon(synthbin_net, synthbin_ds):
    cfg = AttackConfig(epsilon=0.0)
    correct = int((np.argmax(forward(synthbin_net, synthbin_ds.samples), axis=1) == synthbin_ds.labels).sum())
    assert robust_count(synthbin_net, synthbin_net, synthbin_ds, cfg) == correct


def test_robust_count_misclassified_sample_never_robust():
    net = linear_net(np.array([[1.0, -1.0]]))
    ds = LabeledDataset(np.array([[1.0]]), np.array([1]), 2)  # predicted class is 0
    assert robust_count(net, net, ds, AttackConfig(epsilon=0.0)) == 0
    assert robust_count(net, net, ds, AttackConfig(epsilon=0.5)) == 0


def test_robust_count_hand_evaluated_four_points():
    W0 = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    net = Network(
        input_dim=2,
        layers=[
            DenseLayer(W0, np.zeros(2, dtype=np.float32), "relu"),
            DenseLayer(np.array([[4.0, 0.0], [0.0, 4.0]], dtype=np.float32), np.zeros(2, dtype=np.float32), "identity"),
        ],
    )
    samples = np.array([[0.8, 0.2], [0.2, 0.8], [0.55, 0.45], [0.45, 0.55]], dtype=np.float32)
    labels = np.array([0, 1, 0, 1])
    ds = LabeledDataset(samples, labels, 2)
    eps = 0.1
    cfg = AttackConfig(epsilon=eps)
    # oracle: logits are 4*x (both coordinates positive), attack pushes the two
    # coordinates toward each other; prediction flips iff the margin is < 2*eps
    expected = 0
    for (a, b), y in zip(samples, labels):
        pred = 0 if a >= b else 1
        if pred != y:
            continue
        a2 = min(max(a + (eps if pred == 1 else -eps), 0), 1)
        b2 = min(max(b + (eps if pred == 0 else -eps), 0), 1)
        adv_pred = 0 if a2 >= b2 else 1
        if adv_pred == pred:
            expected += 1
    assert expected == 2
    assert robust_count(net, net, ds, cfg) == expected


def test_accuracy_constant_net_counts_first_class():
    net = linear_net(np.zeros((4, 10)))
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 10, 200)
    ds = LabeledDataset(rng.uniform(0, 1, (200, 4)), labels, 10)
    assert accuracy(net, ds) == pytest.approx(float((labels == 0).mean()))


def test_accuracy_matches_sidecar(digits_net, digits_ds):
    import json

    from conftest import FIXTURES

    ref = json.loads((FIXTURES / "mlp_8x8digits.ref.json").read_text())
    assert abs(accuracy(digits_net, digits_ds) - ref["accuracy"]) <= 0.005


def test_topk_identity_and_scale_invariance(digits_net, digits_ds):
    assert topk_preservation(digits_net, digits_net, digits_ds, k=3) == 1.0
    scaled = digits_net.copy()
    scaled.layers[-1].weights *= 2.0
    scaled.layers[-1].bias *= 2.0
    assert topk_preservation(digits_net, scaled, digits_ds, k=3) == 1.0
    with pytest.raises(ValueError):
        topk_preservation(digits_net, digits_net, digits_ds, k=11)


def test_topk_matches_brute_force(digits_net, digits_ds):
    pruned = digits_net.copy()
    for layer, i, j in ((0, 1, 2), (1, 4, 8)):
        prune_pair(pruned, layer, i, j)
    got = topk_preservation(digits_net, pruned, digits_ds, k=3)
    f_logits = forward(digits_net, digits_ds.samples)
    g_logits = forward(pruned, digits_ds.samples)
    matches = 0
    for fr, gr in zip(f_logits, g_logits):
        if set(np.argsort(-fr)[:3]) == set(np.argsort(-gr)[:3]):
            matches += 1
    assert got == pytest.approx(matches / len(digits_ds))


def test_evaluate_pair_identity(synthbin_net, synthbin_ds):
    rep = evaluate_pair(synthbin_net, synthbin_net, synthbin_ds, AttackConfig(epsilon=0.05))
    assert rep.robustness_preservation_ratio == 1.0
    assert rep.accuracy_orig == rep.accuracy_pruned
    assert rep.robust_count_pruned <= rep.accuracy_pruned * rep.n_samples
    assert not rep.degenerate_pruned


def test_evaluate_pair_flags_degenerate_model(synthbin_net, synthbin_ds):
    dead = synthbin_net.copy()
    layer = dead.layers[0]
    layer.weights[:] = 0
    layer.bias[:] = 0
    layer.alive[:] = False
    nxt = dead.layers[1]
    nxt.weights[:] = 0
    rep = evaluate_pair(synthbin_net, dead, synthbin_ds, AttackConfig(epsilon=0.05))
    assert rep.degenerate_pruned
    # constant predictions land at chance level: only samples of the predicted class count
    const_class = int(np.argmax(forward(dead, synthbin_ds.samples[0])))
    chance = float((synthbin_ds.labels == const_class).mean())
    assert rep.accuracy_pruned == pytest.approx(chance)
    assert rep.robust_count_pruned == int((synthbin_ds.labels == const_class).sum())


def test_craft_on_switch_runs_both_ways(digits_net, digits_ds):
    pruned = digits_net.copy()
    for layer, i, j in ((0, 3, 4), (1, 10, 11), (0, 20, 21)):
        prune_pair(pruned, layer, i, j)
    on_pruned = robust_count(digits_net, pruned, digits_ds, AttackConfig(epsilon=0.05, craft_on="pruned"))
    on_original = robust_count(digits_net, pruned, digits_ds, AttackConfig(epsilon=0.05, craft_on="original"))
    assert 0 <= on_pruned <= len(digits_ds)
    assert 0 <= on_original <= len(digits_ds)
    assert on_pruned != on_original  # white-box and transfer attacks differ here


def test_robust_count_upper_bound(digits_net, digits_ds):
    pruned = digits_net.copy()
    prune_pair(pruned, 0, 0, 1)
    cfg = AttackConfig(epsilon=0.05)
    r = robust_count(digits_net, pruned, digits_ds, cfg)
    acc = float((np.argmax(forward(pruned, digits_ds.samples), axis=1) == digits_ds.labels).mean())
    assert r <= acc * len(digits_ds) + 1e-9
