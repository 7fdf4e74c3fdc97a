"""Dense tensors with a recorded reverse-mode graph.

Each op builds a ``Tensor`` holding its parents and a closure that maps the
output gradient onto the parents. ``backward`` walks that graph in reverse
topological order and fills the gradient slots of a ``ParameterStore``.
"""

from __future__ import annotations

from collections import OrderedDict
from contextlib import contextmanager

import numpy as np

from ..errors import GraphStateError, NonFiniteError, ShapeError


_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Evaluate without recording a graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None, check=True):
        data = np.asarray(data, dtype=np.float64)
        if check and not np.isfinite(data).all():
            raise NonFiniteError(f"non-finite values in tensor {name or ''}".strip())
        self.data = data
        self.grad = None
        self.name = name
        rg = requires_grad or (_GRAD_ENABLED and any(p.requires_grad for p in parents))
        self.requires_grad = rg
        # constants keep no graph: nothing to propagate into
        self._parents = tuple(parents) if rg else ()
        self._backward = backward if rg else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape})"

    # operator sugar; the op implementations live in ``ops``
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


class Parameter(Tensor):
    """A learnable leaf. Its ``grad`` slot is always allocated."""

    __slots__ = ()

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


class ParameterStore:
    """Ordered, uniquely named parameters with matching gradient slots."""

    def __init__(self):
        self._params: OrderedDict[str, Parameter] = OrderedDict()

    def add(self, name: str, value) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(np.array(value, dtype=np.float64), name)
        self._params[name] = p
        return p

    def __getitem__(self, name) -> Parameter:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def values(self):
        return list(self._params.values())

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()

    def grads(self):
        return OrderedDict((k, p.grad) for k, p in self._params.items())

    def state(self):
        return OrderedDict((k, p.data.copy()) for k, p in self._params.items())

    def load_state(self, state, strict=True):
        if strict and set(state) != set(self._params):
            missing = sorted(set(self._params) - set(state))
            extra = sorted(set(state) - set(self._params))
            raise KeyError(f"parameter mismatch: missing={missing[:5]} unexpected={extra[:5]}")
        for k, v in state.items():
            if k not in self._params:
                continue
            p = self._params[k]
            v = np.asarray(v, dtype=np.float64)
            if v.shape != p.data.shape:
                raise ShapeError(f"{k}: checkpoint shape {v.shape} != {p.data.shape}")
            p.data = v.copy()

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for k, p in self._params.items():
            out.add(k, p.data.copy())
        return out

    def count(self):
        return int(sum(p.data.size for p in self._params.values()))


def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, store: ParameterStore | None = None, accumulate=False):
    """Reverse-mode pass from a scalar ``loss``.

    Parameter gradients land in the store's slots (zeroed first unless
    ``accumulate``); slots of parameters the loss does not reach stay zero.
    The recorded graph is released afterwards.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss._parents or loss._backward is None:
        raise GraphStateError("no recorded computation: run a forward pass before backward")
    if store is not None and not accumulate:
        store.zero_grad()
    order = _topo(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad = node.grad + g
            continue
        if not node._parents:
            # non-parameter leaf that asked for gradients (e.g. an input under gradcheck)
            node.grad = g if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if pg.shape != p.data.shape:
                raise ShapeError(f"internal: grad shape {pg.shape} != {p.data.shape}")
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    for node in order:
        if not isinstance(node, Parameter) and node._parents:
            node._parents = ()
            node._backward = None
    return store.grads() if store is not None else None
