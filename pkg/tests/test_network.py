import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import numeric
from rexkit import network as nw
from rexkit.dataset import RexWarning, input_matrix, normalize
from rexkit.errors import TrainingError, UsageError
from rexkit.network import Network, TrainConfig

SIGMOID_0_6 = 0.6456563062257954  # 1 / (1 + exp(-0.6)), evaluated with mpmath


def test_sigmoid_oracle():
    import mpmath
    assert float(1 / (1 + mpmath.e ** mpmath.mpf("-0.6"))) == pytest.approx(SIGMOID_0_6, abs=1e-15)
    net = Network([[1.0]], [[1.0]], [0.0], [0.0], [[True]], [[True]])
    hidden, _ = nw.forward(net, [0.6])
    assert hidden[0] == pytest.approx(SIGMOID_0_6, abs=1e-15)


def test_init_shapes_and_determinism():
    a = nw.init_network(9, 2, 7)
    assert a.weights_ih.shape == (1, 9) and a.weights_ho.shape == (2, 1)
    b = nw.init_network(9, 2, 7)
    assert np.array_equal(a.weights_ih, b.weights_ih) and np.array_equal(a.bias_o, b.bias_o)
    assert nw.init_network(4, 3, 123).hidden_count == 1
    assert np.all(np.abs(a.weights_ih) <= nw.INIT_RANGE)


def test_init_zero_counts():
    with pytest.raises(UsageError):
        nw.init_network(0, 2)
    with pytest.raises(UsageError):
        nw.init_network(3, 0)


def test_zero_weights_give_half():
    net = Network(np.zeros((3, 4)), np.zeros((2, 3)), np.zeros(3), np.zeros(2),
                  np.ones((3, 4), bool), np.ones((2, 3), bool))
    hidden, out = nw.forward(net, [0.3, 0.1, 0.9, 1.0])
    assert np.all(hidden == 0.5) and np.all(out == 0.5)


def test_forward_length_mismatch():
    with pytest.raises(UsageError):
        nw.forward(nw.init_network(3, 2), [1.0, 2.0])


def test_mask_hides_weight():
    x = [0.4, 0.8]
    big = nw.init_network(2, 2, 1)
    big.weights_ih[0, 1] = 1e6
    big.mask_ih[0, 1] = False
    zero = big.copy()
    zero.weights_ih[0, 1] = 0.0
    zero.mask_ih[0, 1] = True
    assert np.array_equal(nw.forward(big, x)[1], nw.forward(zero, x)[1])


def test_two_pattern_toy_converges():
    d = numeric([0.0, 1.0], [0, 1])
    net = nw.init_network(1, 2, 0)
    cfg = TrainConfig()
    report = nw.train(net, d, cfg)
    assert report.final_mse < cfg.target_mse
    assert report.epochs_run <= cfg.max_epochs


def test_zero_epochs_leaves_weights():
    d = numeric([0.0, 1.0], [0, 1])
    net = nw.init_network(1, 2, 0)
    before = net.copy()
    report = nw.train(net, d, TrainConfig(max_epochs=0))
    assert report.epochs_run == 0
    assert np.array_equal(net.weights_ih, before.weights_ih)
    assert np.array_equal(net.weights_ho, before.weights_ho)


def test_divergence_reports_epoch(monkeypatch):
    d = numeric([0.0, 1.0], [0, 1])
    net = nw.init_network(1, 2, 0)
    monkeypatch.setattr(nw, "mse", lambda *a: float("nan"))
    with pytest.raises(TrainingError) as info:
        nw.train(net, d, TrainConfig(max_epochs=5))
    assert info.value.epoch == 1


def test_iris_training_accuracy(iris):
    d = normalize(iris)
    X, _ = input_matrix(d)
    net = nw.init_network(X.shape[1], 3, 0)
    report = nw.train(net, d, TrainConfig())
    assert report.train_accuracy >= 0.95
    assert nw.accuracy(net, d) == report.train_accuracy


def test_xor_triggers_growth():
    d = numeric([[0, 0], [0, 1], [1, 0], [1, 1]], [0, 1, 1, 0])
    net = nw.init_network(2, 2, 0)
    report = nw.train(net, d, TrainConfig())
    assert report.hidden_nodes_added >= 1
    assert net.hidden_count == 1 + report.hidden_nodes_added
    assert report.final_mse <= TrainConfig().target_mse


def test_grow_preserves_weights():
    net = nw.init_network(3, 2, 5)
    grown = nw.grow(net)
    assert grown.hidden_count == 2 and net.hidden_count == 1
    assert np.array_equal(grown.weights_ih[:1], net.weights_ih)
    assert np.array_equal(grown.weights_ho[:, :1], net.weights_ho)
    assert np.array_equal(grown.bias_h[:1], net.bias_h)
    assert np.array_equal(grown.bias_o, net.bias_o)


def test_grow_cap_warns():
    net = nw.init_network(3, 2, 5)
    cfg = TrainConfig()
    for _ in range(4):
        net = nw.grow(net, cfg=cfg)
    assert net.hidden_count == 5
    with pytest.warns(RexWarning):
        same = nw.grow(net, cfg=cfg)
    assert same.hidden_count == 5
    assert np.array_equal(same.weights_ih, net.weights_ih)


def test_grow_keeps_removed_inputs_removed():
    net = nw.init_network(3, 2, 5)
    net.mask_ih[:, 1] = False
    grown = nw.grow(net)
    assert nw.removed_inputs(grown) == [1]


def test_prune_drops_constant_input():
    X = [[0.0, 0.0], [0.1, 0.0], [0.9, 0.0], [1.0, 0.0]]
    d = numeric(X, [0, 0, 1, 1])
    with pytest.warns(RexWarning):
        d = normalize(d)
    net = nw.init_network(2, 2, 0)
    nw.train(net, d, TrainConfig())
    before = nw.accuracy(net, d)
    pruned = nw.prune(net, d, TrainConfig())
    assert 1 in nw.removed_inputs(pruned)
    assert nw.accuracy(pruned, d) == before


def test_prune_minimal_network_untouched():
    # one path input -> hidden -> output 0; cutting either link leaves constant outputs
    net = Network([[8.0]], [[8.0], [0.0]], [-4.0], [-4.0, 0.0],
                  [[True]], [[True], [False]])
    d = numeric([0.0, 0.1, 0.9, 1.0], [1, 1, 0, 0])
    assert nw.accuracy(net, d) == 1.0
    pruned = nw.prune(net, d, TrainConfig(prune_accuracy_slack=0.0, max_epochs=100))
    assert np.array_equal(pruned.mask_ih, net.mask_ih)
    assert np.array_equal(pruned.mask_ho, net.mask_ho)


def test_prune_returns_new_network():
    d = numeric([0.0, 0.1, 0.9, 1.0], [0, 0, 1, 1])
    net = nw.init_network(1, 2, 0)
    nw.train(net, d, TrainConfig())
    masks = net.mask_ih.copy(), net.mask_ho.copy()
    nw.prune(net, d, TrainConfig())
    assert np.array_equal(net.mask_ih, masks[0]) and np.array_equal(net.mask_ho, masks[1])


def test_breast_cancer_pruning_keeps_key_input(breast_cancer):
    d = normalize(breast_cancer)
    net = nw.init_network(9, 2, 0)
    nw.train(net, d, TrainConfig())
    pruned = nw.prune(net, d, TrainConfig())
    kept = set(range(9)) - set(nw.removed_inputs(pruned))
    assert kept & {0, 5, 8}
    assert nw.accuracy(pruned, d) >= nw.accuracy(net, d) - 0.01 - 1e-12


def test_accuracy_hand_count():
    d = numeric([[0.2, 0.4], [0.9, 0.1], [0.5, 0.5], [0.3, 0.8]], [0, 1, 1, 0])
    net = Network(np.zeros((1, 2)), np.zeros((2, 1)), [0.0], [0.0, 0.0],
                  np.ones((1, 2), bool), np.ones((2, 1), bool))
    count = 0
    for i in range(len(d)):
        out = nw.forward(net, d.X[i])[1]
        best = 0
        for k in range(len(out)):
            if out[k] > out[best]:
                best = k
        count += best == d.y[i]
    assert nw.accuracy(net, d) == count / len(d) == 0.5


def test_accuracy_perfect_and_empty():
    d = numeric([0.0, 1.0], [1, 0])
    net = Network([[8.0]], [[8.0], [-8.0]], [-4.0], [-4.0, 4.0], [[True]], [[True], [True]])
    assert nw.accuracy(net, d) == 1.0
    with pytest.warns(RexWarning):
        assert nw.accuracy(net, d.subset([])) == 1.0


def test_json_roundtrip():
    net = nw.grow(nw.init_network(4, 3, 2))
    net.mask_ih[0, 2] = False
    again = Network.from_json(net.to_json(TrainConfig()))
    for name in ("weights_ih", "weights_ho", "bias_h", "bias_o", "mask_ih", "mask_ho"):
        assert np.array_equal(getattr(again, name), getattr(net, name))


def _reference_epoch(net, X, T, velocity, lr, mom):
    """Plain numpy per-pattern backprop with momentum."""
    v_ih, v_bh, v_ho, v_bo = velocity
    for x, t in zip(X, T):
        g = nw.pattern_gradients(net, x, t)
        v_ho[:] = np.where(net.mask_ho, mom * v_ho - lr * g["weights_ho"], v_ho)
        v_bo[:] = mom * v_bo - lr * g["bias_o"]
        v_ih[:] = np.where(net.mask_ih, mom * v_ih - lr * g["weights_ih"], v_ih)
        v_bh[:] = mom * v_bh - lr * g["bias_h"]
        net.weights_ho += np.where(net.mask_ho, v_ho, 0.0)
        net.bias_o += v_bo
        net.weights_ih += np.where(net.mask_ih, v_ih, 0.0)
        net.bias_h += v_bh


def test_compiled_epoch_matches_numpy():
    rng = np.random.default_rng(3)
    net = nw.init_network(5, 3, 4)
    for _ in range(2):
        net = nw.grow(net)
    net.mask_ih[1, 3] = False
    net.mask_ho[2, 0] = False
    X = rng.random((12, 5))
    T = nw.one_hot(rng.integers(0, 3, 12), 3)
    ref = net.copy()
    cfg = TrainConfig()
    v_fast, v_ref = nw._zero_velocity(net), nw._zero_velocity(ref)
    for _ in range(3):
        nw.sgd_epoch(net, X, T, v_fast, cfg)
        _reference_epoch(ref, X, T, v_ref, cfg.learning_rate, cfg.momentum)
    for name in ("weights_ih", "weights_ho", "bias_h", "bias_o"):
        assert np.allclose(getattr(net, name), getattr(ref, name), rtol=0, atol=1e-12)


def _numeric_gradient(net, x, t, name, idx, h=1e-6):
    arr = getattr(net, name)
    old = arr[idx]
    arr[idx] = old + h
    up = nw.pattern_loss(net, x, t)
    arr[idx] = old - h
    down = nw.pattern_loss(net, x, t)
    arr[idx] = old
    return (up - down) / (2 * h)


def gradient_error(seed: int) -> float:
    """Largest relative error between backprop and central differences."""
    rng = np.random.default_rng(seed)
    n_in, n_hid, n_out = rng.integers(1, 6), rng.integers(1, 5), rng.integers(1, 4)
    net = Network(rng.uniform(-2, 2, (n_hid, n_in)), rng.uniform(-2, 2, (n_out, n_hid)),
                  rng.uniform(-1, 1, n_hid), rng.uniform(-1, 1, n_out),
                  np.ones((n_hid, n_in), bool), np.ones((n_out, n_hid), bool))
    x = rng.random(n_in)
    t = nw.one_hot([rng.integers(n_out)], n_out)[0]
    grads = nw.pattern_gradients(net, x, t)
    worst = 0.0
    for name, g in grads.items():
        for idx in np.ndindex(g.shape):
            num = _numeric_gradient(net, x, t, name, idx)
            denom = max(abs(num), abs(g[idx]), 1e-8)
            worst = max(worst, abs(num - g[idx]) / denom)
    return worst


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_check(seed):
    assert gradient_error(seed) < 1e-4


def test_masked_gradient_is_zero():
    net = nw.init_network(3, 2, 1)
    net.mask_ih[0, 0] = False
    g = nw.pattern_gradients(net, [0.5, 0.2, 0.1], [1.0, 0.0])
    assert g["weights_ih"][0, 0] == 0.0


@pytest.mark.parametrize("kwargs", [
    {"learning_rate": 0}, {"momentum": 1.0}, {"max_epochs": -1}, {"max_hidden": 0},
    {"prune_accuracy_slack": 2.0}, {"target_mse": math.nan},
])
def test_config_validation(kwargs):
    with pytest.raises(UsageError):
        TrainConfig(**kwargs)


def test_train_empty_data():
    d = numeric([0.0, 1.0], [0, 1])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(UsageError):
            nw.train(nw.init_network(1, 2), d.subset([]))
