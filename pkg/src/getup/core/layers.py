"""Parameterised building blocks registered in a :class:`ParameterStore`."""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .tensor import ParameterStore


def uniform_init(rng, shape, fan_in):
    bound = math.sqrt(1.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """Affine map ``y = x W + b`` with W of shape C_in x C_out."""

    def __init__(self, store: ParameterStore, name, c_in, c_out, rng, bias=True, zero=False):
        self.name = name
        self.c_in, self.c_out = c_in, c_out
        w = np.zeros((c_in, c_out)) if zero else uniform_init(rng, (c_in, c_out), c_in)
        self.weight = store.add(f"{name}.weight", w)
        self.bias = None
        if bias:
            b = np.zeros(c_out) if zero else uniform_init(rng, (c_out,), c_in)
            self.bias = store.add(f"{name}.bias", b)

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)


class MLP:
    """Stack of Linear layers with leaky-ReLU between them (none after the last)."""

    def __init__(self, store, name, widths, rng, final_act=False, zero_last=False):
        self.layers = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            last = i == len(widths) - 2
            self.layers.append(Linear(store, f"{name}.{i}", a, b, rng, zero=zero_last and last))
        self.final_act = final_act

    def __call__(self, x):
        n = len(self.layers)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < n - 1 or self.final_act:
                x = ops.leaky_relu(x)
        return x


class Conv2d:
    def __init__(self, store, name, c_in, c_out, k, rng, stride=1, bias=True):
        self.stride = stride
        fan_in = k * k * c_in
        self.weight = store.add(f"{name}.weight", uniform_init(rng, (k, k, c_in, c_out), fan_in))
        self.bias = store.add(f"{name}.bias", uniform_init(rng, (c_out,), fan_in)) if bias else None

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding="same")
