import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from getup.core import ops
from getup.core.gradcheck import check, leaf, projected
from getup.core.tensor import ParameterStore, Tensor, backward
from getup.decoder import DepthDecoder, DepthMap, GateUnit, depth_loss, total_loss
from getup.errors import DataError, PreconditionError, ShapeError


def random_map(rng, shape, p=0.5):
    v = rng.uniform(1, 60, size=shape)
    m = rng.random(shape) < p
    return DepthMap(np.where(m, v, 0.0), m)


def small_decoder(rng, img_c=(2, 2, 3, 3, 4), c_global=2, widths=(3, 3, 2, 2, 2, 2)):
    store = ParameterStore()
    return store, DepthDecoder(store, "dec", list(img_c), c_global, rng, widths=widths)


def decoder_inputs(rng, H, W, img_c=(2, 2, 3, 3, 4), c_global=2):
    fused = [rng.normal(size=(H >> (i + 1), W >> (i + 1), c)) for i, c in enumerate(img_c)]
    return fused, rng.normal(size=(H, W, c_global))


def test_zero_radar_passes_image_through():
    rng = np.random.default_rng(0)
    store = ParameterStore()
    gate = GateUnit(store, "g", 3, 2, rng)
    store["g.value.bias"].data[...] = 0.0
    f_img = rng.normal(size=(4, 6, 3))
    assert np.array_equal(gate(Tensor(f_img), Tensor(np.zeros((4, 6, 2)))).data, f_img)


def test_saturated_gate_closes():
    rng = np.random.default_rng(1)
    store = ParameterStore()
    gate = GateUnit(store, "g", 3, 2, rng)
    store["g.gate.bias"].data[...] = -800.0
    f_img = rng.normal(size=(4, 4, 3))
    out = gate(Tensor(f_img), Tensor(rng.normal(size=(4, 4, 2)))).data
    assert np.abs(out - f_img).max() < 1e-300


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gate_values_are_open_interval(seed):
    rng = np.random.default_rng(seed)
    gate = GateUnit(ParameterStore(), "g", 2, 2, rng)
    g = gate.gate_values(Tensor(rng.normal(size=(4, 4, 2)) * 5), Tensor(rng.normal(size=(4, 4, 2)) * 5)).data
    assert ((g > 0) & (g < 1)).all()


def test_gate_gradient_reaches_both_branches():
    rng = np.random.default_rng(2)
    gate = GateUnit(ParameterStore(), "g", 3, 2, rng)
    fi, fr = leaf(rng.normal(size=(5, 5, 3))), leaf(rng.normal(size=(5, 5, 2)))
    results = check(lambda: projected(gate(fi, fr)), [fi, fr])
    assert max(r.max_rel_error for r in results) < 1e-4
    assert np.abs(fi.grad).max() > 0 and np.abs(fr.grad).max() > 0
    with pytest.raises(ShapeError):
        gate(Tensor(np.zeros((4, 4, 3))), Tensor(np.zeros((2, 2, 2))))


def test_decoder_output_is_positive_and_sized():
    rng = np.random.default_rng(3)
    store, dec = small_decoder(rng)
    fused, g = decoder_inputs(rng, 32, 64)
    out = dec([Tensor(f) for f in fused], Tensor(g))
    assert out.shape == (32, 64) and (out.data > 0).all()
    for _, p in store:
        p.data *= 2.0
    assert not np.array_equal(dec([Tensor(f) for f in fused], Tensor(g)).data, out.data)
    with pytest.raises(PreconditionError):
        dec([Tensor(f) for f in fused[:4]], Tensor(g))


def test_decoder_gradient_end_to_end():
    # interior weights see gradients near 1e-6 against an O(10) output, which is
    # the float64 round-off floor of central differences; hence the small atol
    rng = np.random.default_rng(4)
    store, dec = small_decoder(rng)
    fused, g = decoder_inputs(rng, 32, 64)
    fused = [leaf(f) for f in fused]
    g = leaf(g)
    w = rng.uniform(-1, 1, size=(32, 64)) * 0.01

    def loss():
        return projected(dec(fused, g), weights=w)

    tensors = fused + [g] + store.values()
    backward(loss(), store)
    probe = np.random.default_rng(5)
    for t in tensors:
        flat = t.data.reshape(-1)
        analytic = t.grad.reshape(-1)
        for i in probe.choice(flat.size, size=min(6, flat.size), replace=False):
            orig = flat[i]
            flat[i] = orig + 1e-5
            fp = float(loss().data)
            flat[i] = orig - 1e-5
            fm = float(loss().data)
            flat[i] = orig
            assert np.isclose(analytic[i], (fp - fm) / 2e-5, rtol=1e-4, atol=1e-8)


def test_depth_loss_examples():
    d = np.full((3, 3), 10.0)
    ones = np.ones((3, 3), bool)
    assert float(depth_loss(Tensor(d), DepthMap(d, ones), DepthMap(d, ones)).data) == 0.0
    ds = np.zeros((3, 3))
    ds[0, 0], ds[2, 1] = 11.0, 7.0
    loss = depth_loss(Tensor(d), DepthMap(ds, ds > 0), DepthMap(np.zeros((3, 3)), np.zeros((3, 3), bool)))
    assert float(loss.data) == 2.0
    with pytest.raises(DataError):
        depth_loss(Tensor(d), DepthMap.from_values(np.zeros((3, 3))), DepthMap.from_values(np.zeros((3, 3))))
    with pytest.raises(ShapeError):
        depth_loss(Tensor(d[:2]), DepthMap(d, ones), DepthMap(d, ones))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_invalid_pixels_do_not_matter(seed):
    rng = np.random.default_rng(seed)
    pred = Tensor(rng.uniform(1, 60, size=(6, 8)))
    single, dense = random_map(rng, (6, 8), 0.2), random_map(rng, (6, 8), 0.7)
    base = depth_loss(pred, single, dense).data
    s2 = DepthMap(np.where(single.valid, single.values, rng.normal(size=(6, 8)) * 1e3), single.valid)
    d2 = DepthMap(np.where(dense.valid, dense.values, rng.normal(size=(6, 8)) * 1e3), dense.valid)
    assert depth_loss(pred, s2, d2).data.tobytes() == base.tobytes()


def test_total_loss_arithmetic_and_gradient_split():
    assert float(total_loss(Tensor(3.0), Tensor(2.0), 1.0).data) == 5.0
    assert float(total_loss(Tensor(3.0), Tensor(2.0), 0.0).data) == 3.0
    assert float(total_loss(Tensor(3.0), None, 1.0).data) == 3.0
    with pytest.raises(PreconditionError):
        total_loss(Tensor(3.0), Tensor(2.0), -1.0)
    a, b = leaf(np.array(3.0)), leaf(np.array(2.0))
    backward(total_loss(ops.mul(a, 1.0), ops.mul(b, 1.0), 0.25))
    assert (float(a.grad), float(b.grad)) == (1.0, 0.25)
