import numpy as np
import pytest

from getup.aggregation import FeatureAggregation, GlobalAggregator, ScaleAggregator
from getup.core.tensor import ParameterStore, Tensor
from getup.errors import ShapeError


def lin(layer, x):
    return x @ layer.weight.data + layer.bias.data


def softmax_rows(s):
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def test_single_row_returns_value_row():
    rng = np.random.default_rng(0)
    agg = ScaleAggregator(ParameterStore(), "s", 4, 3, rng)
    f3, f2 = rng.normal(size=(1, 4)), rng.normal(size=(1, 3))
    assert np.abs(agg(Tensor(f3), Tensor(f2)).data - lin(agg.v, f2)).max() < 1e-15


def test_identical_2d_rows_give_identical_outputs():
    rng = np.random.default_rng(1)
    agg = ScaleAggregator(ParameterStore(), "s", 4, 3, rng)
    out = agg(Tensor(rng.normal(size=(5, 4))), Tensor(np.tile(rng.normal(size=(1, 3)), (5, 1)))).data
    assert np.abs(out - out[:1]).max() < 1e-15


def test_per_scale_composition_oracle_and_width():
    rng = np.random.default_rng(2)
    agg = ScaleAggregator(ParameterStore(), "s", 4, 6, rng)
    f3, f2 = rng.normal(size=(7, 4)), rng.normal(size=(7, 6))
    q, k, v = lin(agg.q, f3), lin(agg.k, f2), lin(agg.v, f2)
    ref = softmax_rows(q @ k.T / np.sqrt(6)) @ v
    out = agg(Tensor(f3), Tensor(f2)).data
    assert out.shape == (7, 6)
    assert np.abs(out - ref).max() < 1e-12
    with pytest.raises(ShapeError):
        agg(Tensor(f3), Tensor(f2[:3]))


def test_global_concatenation_width():
    rng = np.random.default_rng(3)
    widths = [2, 3, 4, 5, 6]
    agg = GlobalAggregator(ParameterStore(), "g", 4, widths, 7, rng)
    assert agg.c_cat == 20 and agg.k.weight.shape == (20, 7)
    out = agg(Tensor(rng.normal(size=(5, 4))), [Tensor(rng.normal(size=(5, c))) for c in widths])
    assert out.shape == (5, 7)
    with pytest.raises(ShapeError):
        agg(Tensor(rng.normal(size=(5, 4))), [Tensor(rng.normal(size=(4, c))) for c in widths])


def test_zero_query_gives_mean_of_values():
    rng = np.random.default_rng(4)
    widths = [2, 2, 3, 3, 4]
    agg = GlobalAggregator(ParameterStore(), "g", 4, widths, 5, rng)
    agg.q.bias.data[...] = 0.0
    f2 = [rng.normal(size=(6, c)) for c in widths]
    out = agg(Tensor(np.zeros((6, 4))), [Tensor(f) for f in f2]).data
    v = lin(agg.v, np.concatenate(f2, axis=1))
    assert np.abs(out - v.mean(axis=0)).max() < 1e-14


def test_aggregation_permutation_consistency():
    rng = np.random.default_rng(5)
    widths = [2, 3, 3, 4, 4]
    agg = FeatureAggregation(ParameterStore(), "agg", 5, widths, 6, rng)
    f3 = rng.normal(size=(9, 5))
    f2 = [rng.normal(size=(9, c)) for c in widths]
    perm = rng.permutation(9)
    a = agg(Tensor(f3), [Tensor(f) for f in f2])
    b = agg(Tensor(f3[perm]), [Tensor(f[perm]) for f in f2])
    assert [p.shape for p in a.per_scale] == [(9, c) for c in widths]
    assert a.global_.shape == (9, 6)
    for x, y in zip(a.per_scale + [a.global_], b.per_scale + [b.global_]):
        assert np.array_equal(x.data[perm], y.data)


def test_aggregation_is_deterministic():
    rng = np.random.default_rng(6)
    agg = FeatureAggregation(ParameterStore(), "agg", 3, [2] * 5, 4, rng)
    f3 = Tensor(rng.normal(size=(4, 3)))
    f2 = [Tensor(rng.normal(size=(4, 2))) for _ in range(5)]
    assert np.array_equal(agg(f3, f2).global_.data, agg(f3, f2).global_.data)
