import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from getup.core import Parameter, ParameterStore, Tensor, backward, no_grad, ops
from getup.core.gradcheck import EPS, REL_TOL, check, leaf, projected, relative_error
from getup.core.layers import Conv2d, Linear
from getup.errors import ConfigError, GraphStateError, NonFiniteError, PreconditionError, ShapeError
from oracles import conv_oracle


def tconv_oracle(f, w, b, rate):
    """Zero insertion followed by a direct 1-D convolution with the flipped kernel."""
    n, _ = f.shape
    K, _, co = w.shape
    pad = (K - rate) // 2
    up = np.zeros((rate * n + K, f.shape[1]))
    # place sample j at position j*rate + (K-1) - pad in a padded stream
    for j in range(n):
        up[j * rate + K - 1 - pad] = f[j]
    out = np.zeros((rate * n, co))
    for p in range(rate * n):
        for t in range(K):
            out[p] += up[p + K - 1 - t] @ w[t]
    return out + b


# ---------------------------------------------------------------- tensors and graph


def test_tensor_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        Tensor([1.0, np.nan])
    with pytest.raises(NonFiniteError):
        Tensor([np.inf])


def test_backward_sum_of_parameter_gives_ones():
    store = ParameterStore()
    p = store.add("p", np.arange(6.0).reshape(2, 3))
    store.add("unused", np.ones(4))
    grads = backward(ops.total(p), store)
    assert np.array_equal(grads["p"], np.ones((2, 3)))
    assert np.array_equal(grads["unused"], np.zeros(4))


def test_backward_without_forward_is_state_error():
    store = ParameterStore()
    p = store.add("p", [1.0])
    with pytest.raises(GraphStateError):
        backward(p, store)
    loss = ops.total(p)
    backward(loss, store)
    with pytest.raises(GraphStateError):
        backward(loss, store)  # graph released


def test_backward_needs_scalar():
    p = Parameter(np.ones(3), "p")
    with pytest.raises(ShapeError):
        backward(ops.mul(p, 2.0))


def test_accumulate_adds_gradients():
    store = ParameterStore()
    p = store.add("p", [2.0])
    backward(ops.total(ops.mul(p, 3.0)), store)
    backward(ops.total(ops.mul(p, 3.0)), store, accumulate=True)
    assert store["p"].grad[0] == 6.0


def test_no_grad_records_nothing():
    p = Parameter(np.ones(2), "p")
    with no_grad():
        y = ops.total(ops.mul(p, 2.0))
    assert not y.requires_grad
    with pytest.raises(GraphStateError):
        backward(y)


def test_store_names_unique_and_state_roundtrip():
    s = ParameterStore()
    s.add("a", np.zeros(2))
    with pytest.raises(KeyError):
        s.add("a", np.zeros(2))
    s2 = s.copy()
    s2["a"].data = np.ones(2)
    s.load_state(s2.state())
    assert np.array_equal(s["a"].data, np.ones(2))
    with pytest.raises(ShapeError):
        s.load_state({"a": np.zeros(3)})
    with pytest.raises(KeyError):
        s.load_state({"b": np.zeros(2)})


# ---------------------------------------------------------------- linear


def _linear_with(w, b):
    w = np.asarray(w, float)
    store = ParameterStore()
    lin = Linear(store, "l", w.shape[0], w.shape[1], np.random.default_rng(0))
    store["l.weight"].data = np.asarray(w, float)
    store["l.bias"].data = np.asarray(b, float)
    return lin


def test_linear_examples():
    lin = _linear_with(np.random.default_rng(1).normal(size=(2, 2)), [3.0, 4.0])
    assert np.array_equal(lin(Tensor(np.zeros((1, 2)))).data, [[3.0, 4.0]])
    x = np.eye(3)
    assert np.array_equal(_linear_with(np.eye(3), np.zeros(3))(Tensor(x)).data, x)
    lin = _linear_with([[1, 0], [0, 1]], [1, 1])
    assert np.array_equal(lin(Tensor([[1.0, 2.0]])).data, [[2.0, 3.0]])


def test_linear_shape_mismatch():
    lin = _linear_with(np.eye(2), np.zeros(2))
    with pytest.raises(ShapeError):
        lin(Tensor(np.ones((1, 3))))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_and_conv_are_additive(seed):
    rng = np.random.default_rng(seed)
    lin = _linear_with(rng.normal(size=(3, 4)), rng.normal(size=4))
    x1, x2 = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    f = lambda x: lin(Tensor(x)).data
    assert np.abs(f(x1 + x2) - f(x1) - f(x2) + f(np.zeros_like(x1))).max() < 1e-9
    w = rng.normal(size=(3, 3, 2, 2))
    b = rng.normal(size=2)
    g = lambda x: ops.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    y1, y2 = rng.normal(size=(6, 5, 2)), rng.normal(size=(6, 5, 2))
    assert np.abs(g(y1 + y2) - g(y1) - g(y2) + g(np.zeros_like(y1))).max() < 1e-9


# ---------------------------------------------------------------- attention


def test_attention_single_key_returns_value_row():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(1, 3))
    out = ops.attention(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(1, 3))), Tensor(v)).data
    assert np.allclose(out, np.repeat(v, 4, axis=0), atol=0, rtol=1e-15)


def test_attention_identical_keys_average_values():
    rng = np.random.default_rng(1)
    k = np.repeat(rng.normal(size=(1, 2)), 5, axis=0)
    v = rng.normal(size=(5, 2))
    out = ops.attention(Tensor(rng.normal(size=(3, 2))), Tensor(k), Tensor(v)).data
    assert np.allclose(out, v.mean(axis=0), atol=1e-14)


def test_attention_hand_example():
    q, k, v = np.array([[1.0, 0.0]]), np.eye(2), np.eye(2)
    s = np.array([1 / np.sqrt(2), 0.0])
    w = np.exp(s) / np.exp(s).sum()
    out = ops.attention(Tensor(q), Tensor(k), Tensor(v)).data
    assert np.allclose(out, w[None, :], atol=1e-15)


def test_attention_weights_are_a_distribution():
    rng = np.random.default_rng(2)
    w = ops.attention_weights(rng.normal(size=(6, 4)) * 5, rng.normal(size=(7, 4)) * 5)
    assert np.all(w >= 0)
    assert np.abs(w.sum(axis=1) - 1).max() < 1e-12


def test_attention_empty_keys():
    with pytest.raises(PreconditionError):
        ops.attention(Tensor(np.ones((2, 2))), Tensor(np.zeros((0, 2))), Tensor(np.zeros((0, 2))))


# ---------------------------------------------------------------- conv2d


def test_conv2d_identity_and_box():
    x = np.random.default_rng(0).normal(size=(5, 6, 1))
    assert np.array_equal(ops.conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1)))).data, x)
    c = np.full((5, 5, 1), 2.5)
    out = ops.conv2d(Tensor(c), Tensor(np.ones((3, 3, 1, 1)))).data
    assert np.allclose(out[1:-1, 1:-1], 9 * 2.5, rtol=0, atol=1e-12)


@pytest.mark.parametrize("stride,padding", [(1, "same"), (2, "same"), (1, "valid")])
def test_conv2d_matches_loop_oracle(stride, padding):
    rng = np.random.default_rng(stride)
    x = rng.normal(size=(5, 5, 2))
    w = rng.normal(size=(3, 3, 2, 3))
    b = rng.normal(size=3)
    out = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding).data
    assert np.abs(out - conv_oracle(x, w, b, stride, padding)).max() < 1e-10


def test_conv2d_errors():
    with pytest.raises(ConfigError):
        ops.conv2d(Tensor(np.ones((4, 4, 1))), Tensor(np.ones((2, 2, 1, 1))))
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.ones((2, 2, 1))), Tensor(np.ones((5, 5, 1, 1))), padding="valid")


# ---------------------------------------------------------------- transposed conv


@pytest.mark.parametrize("n,rate", [(32, 2), (1, 2), (1, 3), (7, 4)])
def test_transposed_conv_counts(n, rate):
    rng = np.random.default_rng(n)
    out = ops.transposed_conv1d_points(Tensor(rng.normal(size=(n, 3))), Tensor(rng.normal(size=(rate, 3, 2))),
                                       rate=rate)
    assert out.shape == (rate * n, 2)


@pytest.mark.parametrize("K,rate", [(2, 2), (4, 2), (3, 3), (5, 3)])
def test_transposed_conv_matches_zero_insertion_oracle(K, rate):
    rng = np.random.default_rng(K * 10 + rate)
    f, w, b = rng.normal(size=(3, 2)), rng.normal(size=(K, 2, 4)), rng.normal(size=4)
    out = ops.transposed_conv1d_points(Tensor(f), Tensor(w), Tensor(b), rate=rate).data
    assert np.abs(out - tconv_oracle(f, w, b, rate)).max() < 1e-12


def test_transposed_conv_rate_one_rejected():
    with pytest.raises(ConfigError):
        ops.transposed_conv1d_points(Tensor(np.ones((2, 2))), Tensor(np.ones((1, 2, 2))), rate=1)


# ---------------------------------------------------------------- primitive gradients


def _grad_ok(loss_fn, tensors):
    res = check(loss_fn, tensors)
    worst = max(r.max_rel_error for r in res)
    assert worst < REL_TOL, [(r.name, r.max_rel_error) for r in res]


PRIMITIVES = {
    "add_broadcast": lambda r: ([leaf(r.normal(size=(3, 4))), leaf(r.normal(size=(4,)))],
                                lambda a, b: projected(ops.add(a, b))),
    "sub": lambda r: ([leaf(r.normal(size=(3, 4))), leaf(r.normal(size=(3, 4)))],
                      lambda a, b: projected(ops.sub(a, b))),
    "mul_broadcast": lambda r: ([leaf(r.normal(size=(2, 3, 4))), leaf(r.normal(size=(1, 1, 4)))],
                                lambda a, b: projected(ops.mul(a, b))),
    "leaky_relu": lambda r: ([leaf(r.normal(size=(5, 3)))], lambda a: projected(ops.leaky_relu(a))),
    "sigmoid": lambda r: ([leaf(r.normal(size=(5, 3)) * 3)], lambda a: projected(ops.sigmoid(a))),
    "softplus": lambda r: ([leaf(r.normal(size=(5, 3)) * 3)], lambda a: projected(ops.softplus(a))),
    "absolute": lambda r: ([leaf(r.normal(size=(5, 3)))], lambda a: projected(ops.absolute(a))),
    "mean": lambda r: ([leaf(r.normal(size=(5, 3)))], lambda a: ops.mean(ops.mul(a, a))),
    "concat": lambda r: ([leaf(r.normal(size=(3, 2))), leaf(r.normal(size=(3, 4)))],
                         lambda a, b: projected(ops.concat([a, b], axis=1))),
    "reshape": lambda r: ([leaf(r.normal(size=(3, 4)))], lambda a: projected(ops.reshape(a, (2, 6)))),
    "repeat_rows": lambda r: ([leaf(r.normal(size=(3, 2)))], lambda a: projected(ops.repeat_rows(a, 3))),
    "gather_rows": lambda r: ([leaf(r.normal(size=(4, 3)))],
                              lambda a: projected(ops.gather_rows(a, np.array([[0, 2], [2, 3], [1, 1]])))),
    "gather_cells": lambda r: ([leaf(r.normal(size=(4, 4, 2)))],
                               lambda a: projected(ops.gather_cells(a, np.array([0, 3, 3]), np.array([1, 2, 2])))),
    "scatter_add_cells": lambda r: ([leaf(r.normal(size=(4, 4, 2))), leaf(r.normal(size=(3, 2)))],
                                    lambda m, f: projected(ops.scatter_add_cells(m, f, np.array([0, 3, 3]),
                                                                                 np.array([1, 2, 2])))),
    "max_axis": lambda r: ([leaf(r.normal(size=(4, 3, 5)))], lambda a: projected(ops.max_axis(a, 1))),
    "upsample2x": lambda r: ([leaf(r.normal(size=(3, 4, 2)))], lambda a: projected(ops.upsample2x(a))),
    "matmul": lambda r: ([leaf(r.normal(size=(3, 4))), leaf(r.normal(size=(4, 2)))],
                         lambda a, b: projected(ops.matmul(a, b))),
    "attention": lambda r: ([leaf(r.normal(size=(3, 4))), leaf(r.normal(size=(5, 4))), leaf(r.normal(size=(5, 4)))],
                            lambda q, k, v: projected(ops.attention(q, k, v))),
    "masked_mean_abs": lambda r: ([leaf(r.normal(size=(4, 4)))],
                                  lambda p: ops.masked_mean_abs(p, np.full((4, 4), 0.1), np.eye(4, dtype=bool))),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    tensors, fn = PRIMITIVES[name](np.random.default_rng(7))
    _grad_ok(lambda: fn(*tensors), tensors)


def test_layer_gradients():
    rng = np.random.default_rng(3)
    store = ParameterStore()
    conv = Conv2d(store, "c", 2, 3, 5, rng, stride=2)
    x = leaf(rng.normal(size=(9, 7, 2)))
    _grad_ok(lambda: projected(conv(x)), [x] + store.values())


def test_relative_error_floor():
    assert relative_error([0.0], [0.0]) == 0.0
    assert relative_error([1.0], [1.0 + 1e-6]) == pytest.approx(1e-6 / (1 + 1e-6), rel=1e-9)
    assert EPS == 1e-5
