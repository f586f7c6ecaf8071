import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wpcra.model import (
    TrainConfig,
    local_train,
    num_params,
    predict,
    predict_logits,
    softmax,
    softmax_cross_entropy_grad,
    unpack,
    zeros,
)


def naive_logits(params, x, F):
    C = len(params) // (F + 1)
    out = []
    for c in range(C):
        s = params[c * (F + 1) + F]
        for j in range(F):
            s += params[c * (F + 1) + j] * x[j]
        out.append(s)
    return np.array(out)


def fd_grad(params, X, y, h=1e-5):
    g = np.zeros_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = h
        lp, _ = softmax_cross_entropy_grad(params + e, X, y)
        lm, _ = softmax_cross_entropy_grad(params - e, X, y)
        g[k] = (lp - lm) / (2 * h)
    return g


def test_layout_and_zeros():
    assert num_params(4, 3) == 15
    W, b = unpack(np.arange(15.0), 4)
    assert W.shape == (3, 4) and b.tolist() == [4.0, 9.0, 14.0]
    assert np.all(predict_logits(zeros(4, 3), np.ones(4)) == 0)


def test_identity_pick():
    p = zeros(3, 2)
    p[0] = 1.0
    np.testing.assert_array_equal(predict_logits(p, np.array([1.0, 0, 0])), [1.0, 0.0])


def test_logits_match_double_loop(rng):
    for _ in range(10):
        F, C = rng.integers(2, 7), rng.integers(2, 5)
        p = rng.normal(size=num_params(F, C))
        X = rng.normal(size=(5, F))
        batch = predict_logits(p, X)
        for i in range(5):
            np.testing.assert_allclose(batch[i], naive_logits(p, X[i], F), atol=1e-12)


def test_bad_length_rejected():
    with pytest.raises(ValueError):
        predict_logits(np.zeros(7), np.zeros(3))


def test_zero_params_loss_is_log_c():
    X = np.random.default_rng(0).random((6, 4))
    loss, _ = softmax_cross_entropy_grad(zeros(4, 5), X, np.arange(6) % 5)
    assert loss == pytest.approx(np.log(5), abs=1e-12)


def test_gradient_against_finite_differences(rng):
    F, C = 4, 3
    p = rng.normal(size=num_params(F, C))
    X = rng.random((7, F))
    y = rng.integers(0, C, 7)
    _, g = softmax_cross_entropy_grad(p, X, y)
    assert np.max(np.abs(g - fd_grad(p, X, y))) < 1e-6


def test_confident_sample_has_tiny_loss():
    p = zeros(2, 3)
    p[2] = 20.0   # bias of class 0
    p[5] = -20.0
    p[8] = -20.0
    loss, g = softmax_cross_entropy_grad(p, np.zeros((1, 2)), np.array([0]))
    assert loss < 1e-6
    assert np.max(np.abs(g)) < 1e-6


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        softmax_cross_entropy_grad(zeros(2, 2), np.zeros((0, 2)), np.zeros(0, int))


def test_zero_learning_rate_is_identity(rng):
    p = rng.normal(size=num_params(3, 2))
    out = local_train(p, rng.random((4, 3)), np.array([0, 1, 0, 1]), TrainConfig(0.0, 1))
    np.testing.assert_array_equal(out, p)


def test_one_full_batch_step(rng):
    p = rng.normal(size=num_params(3, 3))
    X, y = rng.random((9, 3)), np.arange(9) % 3
    _, g = softmax_cross_entropy_grad(p, X, y)
    out = local_train(p, X, y, TrainConfig(0.3, 1))
    np.testing.assert_allclose(out, p - 0.3 * g, atol=1e-15)


def test_loss_decreases_on_separable_data():
    X = np.array([[0.0, 0.1], [0.1, 0.0], [1.0, 0.9], [0.9, 1.0]])
    y = np.array([0, 0, 1, 1])
    p = zeros(2, 2)
    cfg = TrainConfig(0.5, 1)
    losses = []
    for _ in range(11):
        losses.append(softmax_cross_entropy_grad(p, X, y)[0])
        p = local_train(p, X, y, cfg)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_minibatch_needs_rng_and_is_seeded():
    X = np.random.default_rng(1).random((20, 3))
    y = np.arange(20) % 2
    cfg = TrainConfig(0.1, 3, batch_size=5)
    with pytest.raises(ValueError):
        local_train(zeros(3, 2), X, y, cfg)
    a = local_train(zeros(3, 2), X, y, cfg, np.random.default_rng(3))
    b = local_train(zeros(3, 2), X, y, cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(local_iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_predict_ties_go_low():
    assert predict(zeros(2, 4), np.ones((3, 2))).tolist() == [0, 0, 0]


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 6)), elements=finite))
def test_softmax_rows_sum_to_one(z):
    np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_property(seed):
    r = np.random.default_rng(seed)
    F, C, n = int(r.integers(2, 5)), int(r.integers(2, 4)), int(r.integers(1, 6))
    p = r.normal(size=num_params(F, C))
    X, y = r.random((n, F)), r.integers(0, C, n)
    _, g = softmax_cross_entropy_grad(p, X, y)
    assert np.max(np.abs(g - fd_grad(p, X, y))) < 1e-6
