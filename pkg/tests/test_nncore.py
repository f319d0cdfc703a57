"""Network core: forward/backward oracles, optimizer traces, scheduler values."""

import math

import mpmath
import numpy as np
import pytest

from labelramp import (
    Layer,
    Model,
    OptimHyper,
    backward,
    forward,
    init_model,
    lr_at_epoch,
    one_hot_rows,
    sgd_step,
    snapshot,
    soft_ce,
    train_batches,
)
from labelramp.errors import ConfigError, NumericError, ShapeError
from labelramp.nncore import loss_and_grads


def random_model(rng, max_hidden=2, max_width=8, in_dim=None, out_dim=None):
    dims = [in_dim or int(rng.integers(1, max_width + 1))]
    for _ in range(int(rng.integers(0, max_hidden + 1))):
        dims.append(int(rng.integers(1, max_width + 1)))
    dims.append(out_dim or int(rng.integers(2, max_width + 1)))
    return init_model(dims, rng)


def random_targets(rng, batch, classes):
    t = rng.uniform(0.05, 1.0, size=(batch, classes))
    return t / t.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- forward

def test_forward_all_zero_parameters():
    model = Model([Layer(np.zeros((3, 4)), np.zeros(4), "relu"),
                   Layer(np.zeros((4, 2)), np.zeros(2), "none")])
    out = forward(model, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.array_equal(out, np.zeros((5, 2)))


def test_forward_identity_layer():
    model = Model([Layer(np.eye(4), np.zeros(4), "none")])
    v = np.array([[0.5, -1.25, 3.0, 0.0]])
    assert np.array_equal(forward(model, v), v)


def test_forward_matches_hand_rolled_matmul():
    rng = np.random.default_rng(11)
    model = init_model([5, 7, 3], rng)
    x = rng.normal(size=(6, 5))
    # independent oracle: explicit loops, no numpy matmul
    def slow_forward(x):
        out = []
        for row in x:
            h = []
            w0, b0 = model.layers[0].weight, model.layers[0].bias
            for j in range(7):
                s = b0[j]
                for i in range(5):
                    s += row[i] * w0[i, j]
                h.append(max(s, 0.0))
            w1, b1 = model.layers[1].weight, model.layers[1].bias
            o = []
            for j in range(3):
                s = b1[j]
                for i in range(7):
                    s += h[i] * w1[i, j]
                o.append(s)
            out.append(o)
        return np.array(out)

    assert np.abs(forward(model, x) - slow_forward(x)).max() < 1e-10


def test_forward_rejects_wrong_width():
    model = init_model([4, 3], np.random.default_rng(0))
    with pytest.raises(ShapeError):
        forward(model, np.zeros((2, 5)))


def test_final_layer_must_be_linear():
    with pytest.raises(ConfigError):
        Model([Layer(np.zeros((2, 2)), np.zeros(2), "relu")])


# ---------------------------------------------------------------- soft_ce

def test_soft_ce_uniform_logits_one_hot_target():
    logits = np.zeros((1, 4))
    loss, _ = soft_ce(logits, one_hot_rows([2], 4))
    assert abs(loss - math.log(4)) < 1e-12


def test_soft_ce_gradient_zero_at_fixed_point():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(4, 6))
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    _, grad = soft_ce(logits, probs)
    assert np.abs(grad).max() < 1e-15


def test_soft_ce_matches_extended_precision_oracle():
    rng = np.random.default_rng(17)
    logits = rng.normal(scale=5.0, size=(5, 7))
    targets = random_targets(rng, 5, 7)
    mpmath.mp.dps = 50
    total = mpmath.mpf(0)
    for z, t in zip(logits, targets):
        lse = mpmath.log(mpmath.fsum(mpmath.e**mpmath.mpf(v) for v in z))
        total += -mpmath.fsum(mpmath.mpf(tc) * (mpmath.mpf(zc) - lse) for zc, tc in zip(z, t))
    expected = float(total / 5)
    loss, _ = soft_ce(logits, targets)
    assert abs(loss - expected) < 1e-10


def test_soft_ce_one_hot_equals_integer_cross_entropy():
    rng = np.random.default_rng(23)
    logits = rng.normal(size=(8, 5))
    labels = rng.integers(5, size=8)
    loss, _ = soft_ce(logits, one_hot_rows(labels, 5))
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    std = -log_probs[np.arange(8), labels].mean()
    assert abs(loss - std) < 1e-12


def test_soft_ce_rejects_non_finite():
    with pytest.raises(NumericError):
        soft_ce(np.array([[0.0, np.inf]]), np.array([[0.5, 0.5]]))


# ---------------------------------------------------------------- backward

def finite_difference_grads(model, x, targets, h=1e-5):
    grads = []
    for layer in model.layers:
        gw = np.zeros_like(layer.weight)
        for i in range(layer.weight.shape[0]):
            for j in range(layer.weight.shape[1]):
                orig = layer.weight[i, j]
                layer.weight[i, j] = orig + h
                up, _ = soft_ce(forward(model, x), targets)
                layer.weight[i, j] = orig - h
                dn, _ = soft_ce(forward(model, x), targets)
                layer.weight[i, j] = orig
                gw[i, j] = (up - dn) / (2 * h)
        gb = np.zeros_like(layer.bias)
        for j in range(layer.bias.shape[0]):
            orig = layer.bias[j]
            layer.bias[j] = orig + h
            up, _ = soft_ce(forward(model, x), targets)
            layer.bias[j] = orig - h
            dn, _ = soft_ce(forward(model, x), targets)
            layer.bias[j] = orig
            gb[j] = (up - dn) / (2 * h)
        grads.append((gw, gb))
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4, floor=1e-7):
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            tol = rel * np.maximum(np.abs(a), np.abs(n)) + floor
            assert (np.abs(a - n) <= tol).all()


def test_backward_zero_inputs_zero_targets():
    model = Model([Layer(np.random.default_rng(1).normal(size=(3, 4)), np.zeros(4), "relu"),
                   Layer(np.random.default_rng(2).normal(size=(4, 2)), np.zeros(2), "none")])
    grads = backward(model, np.zeros((4, 3)), np.zeros((4, 2)))
    for gw, _ in grads:
        assert np.abs(gw).max() == 0.0


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(41)
    for _ in range(10):
        model = random_model(rng)
        batch = int(rng.integers(1, 5))
        x = rng.normal(size=(batch, model.input_dim))
        targets = random_targets(rng, batch, model.output_dim)
        analytic = backward(model, x, targets)
        numeric = finite_difference_grads(model, x, targets)
        assert_grads_close(analytic, numeric)


def test_backward_duplicate_sample_equals_single():
    rng = np.random.default_rng(5)
    model = random_model(rng, in_dim=4, out_dim=3)
    x = rng.normal(size=(1, 4))
    t = random_targets(rng, 1, 3)
    single = backward(model, x, t)
    doubled = backward(model, np.vstack([x, x]), np.vstack([t, t]))
    for (gw1, gb1), (gw2, gb2) in zip(single, doubled):
        assert np.array_equal(gw1, gw2)
        assert np.array_equal(gb1, gb2)


# ---------------------------------------------------------------- sgd_step

def plain_hyper(**kw):
    defaults = dict(base_lr=0.1, milestones=(), gamma=1.0,
                    weight_decay=0.0, momentum=0.0, nesterov=False)
    defaults.update(kw)
    return OptimHyper(**defaults)


def test_sgd_plain_update():
    model = Model([Layer(np.full((2, 2), 1.0), np.zeros(2), "none")])
    grads = [(np.full((2, 2), 0.5), np.array([0.25, -0.25]))]
    sgd_step(model, grads, plain_hyper(), 0.1)
    assert np.allclose(model.layers[0].weight, 1.0 - 0.1 * 0.5, atol=0, rtol=0)
    assert np.array_equal(model.layers[0].bias, -0.1 * np.array([0.25, -0.25]))


def test_sgd_weight_decay_update():
    w0 = 2.0
    model = Model([Layer(np.full((1, 1), w0), np.zeros(1), "none")])
    g = 0.3
    sgd_step(model, [(np.full((1, 1), g), np.zeros(1))],
             plain_hyper(weight_decay=0.0005), 0.1)
    assert model.layers[0].weight[0, 0] == w0 - 0.1 * (g + 0.0005 * w0)


@pytest.mark.parametrize("nesterov", [False, True])
def test_sgd_momentum_two_step_hand_trace(nesterov):
    w0, g1, g2, lr, mu, wd = 1.5, 0.4, -0.2, 0.05, 0.9, 0.01
    model = Model([Layer(np.full((1, 1), w0), np.zeros(1), "none")])
    hyper = plain_hyper(momentum=mu, weight_decay=wd, nesterov=nesterov)
    velocity = []
    # independent step-by-step trace with plain python floats
    w, v = w0, 0.0
    for g in (g1, g2):
        d = g + wd * w
        v = mu * v + d
        w = w - lr * (d + mu * v) if nesterov else w - lr * v
    sgd_step(model, [(np.full((1, 1), g1), np.zeros(1))], hyper, lr, velocity)
    sgd_step(model, [(np.full((1, 1), g2), np.zeros(1))], hyper, lr, velocity)
    assert abs(model.layers[0].weight[0, 0] - w) < 1e-15


def test_sgd_rejects_nonpositive_lr():
    model = init_model([2, 2], np.random.default_rng(0))
    with pytest.raises(ConfigError):
        sgd_step(model, [(np.zeros((2, 2)), np.zeros(2))], plain_hyper(), 0.0)


# ---------------------------------------------------------------- scheduler

def test_lr_at_epoch_exact_values():
    hyper = OptimHyper(base_lr=0.1, milestones=(90, 180, 260), gamma=0.2)
    assert lr_at_epoch(hyper, 0) == 0.1
    assert lr_at_epoch(hyper, 100) == 0.02
    assert lr_at_epoch(hyper, 200) == 0.004
    assert lr_at_epoch(hyper, 270) == 0.0008


def test_lr_decays_at_milestone_epoch():
    hyper = OptimHyper(base_lr=0.1, milestones=(90,), gamma=0.2)
    assert lr_at_epoch(hyper, 89) == 0.1
    assert lr_at_epoch(hyper, 90) == 0.02


def test_lr_piecewise_constant_non_increasing():
    hyper = OptimHyper(base_lr=0.3, milestones=(5, 9, 21), gamma=0.5)
    values = [lr_at_epoch(hyper, e) for e in range(30)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert len(set(values)) == 4


def test_milestones_must_ascend():
    with pytest.raises(ConfigError):
        OptimHyper(base_lr=0.1, milestones=(10, 10), gamma=0.5)


# ---------------------------------------------------------------- snapshot

def one_training_step(model, rng):
    x = rng.normal(size=(4, model.input_dim))
    t = random_targets(rng, 4, model.output_dim)
    sgd_step(model, backward(model, x, t), plain_hyper(), 0.1)


def test_snapshot_unaffected_by_later_training():
    rng = np.random.default_rng(9)
    model = random_model(rng, in_dim=4, out_dim=3)
    probe = rng.normal(size=(6, 4))
    snap = snapshot(model)
    before = forward(snap.model, probe)
    for _ in range(5):
        one_training_step(model, rng)
    assert np.array_equal(before, forward(snap.model, probe))
    assert not np.array_equal(before, forward(model, probe))


def test_snapshot_of_fresh_model_matches_same_seed_init():
    a = init_model([3, 5, 2], np.random.default_rng(77))
    b = init_model([3, 5, 2], np.random.default_rng(77))
    snap = snapshot(a)
    x = np.random.default_rng(1).normal(size=(4, 3))
    assert np.array_equal(forward(snap.model, x), forward(b, x))


def test_snapshot_predictions_equal_copied_weights():
    rng = np.random.default_rng(13)
    model = random_model(rng, in_dim=6, out_dim=4)
    x = rng.normal(size=(9, 6))
    snap = snapshot(model, epoch=3)
    assert snap.epoch == 3
    assert np.array_equal(forward(snap.model, x), forward(model, x))


def test_snapshot_parameters_are_read_only():
    snap = snapshot(init_model([2, 2], np.random.default_rng(0)))
    with pytest.raises(ValueError):
        snap.model.layers[0].weight[0, 0] = 1.0


# ---------------------------------------------------------------- training

def test_training_is_bit_deterministic():
    def train_once():
        rng = np.random.default_rng(99)
        model = init_model([4, 8, 3], np.random.default_rng(5))
        hyper = plain_hyper(momentum=0.9, nesterov=True, weight_decay=0.0005)
        velocity = []
        for _ in range(20):
            x = rng.normal(size=(8, 4))
            labels = rng.integers(3, size=8)
            batches = [(np.arange(8), labels, one_hot_rows(labels, 3))]
            train_batches(model, x, batches, hyper, 0.1, velocity)
        return model

    m1, m2 = train_once(), train_once()
    for l1, l2 in zip(m1.layers, m2.layers):
        assert np.array_equal(l1.weight, l2.weight)
        assert np.array_equal(l1.bias, l2.bias)


def test_train_batches_reports_weighted_metrics():
    model = init_model([2, 3], np.random.default_rng(2))
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    labels = np.array([0, 1, 2])
    prior = forward(model, x).argmax(axis=1)
    expected_acc = 100.0 * int((prior == labels).sum()) / 3
    _, acc = train_batches(model, x, [(np.arange(3), labels, one_hot_rows(labels, 3))],
                           plain_hyper(), 0.01)
    assert acc == expected_acc
