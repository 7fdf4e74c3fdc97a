"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Parameter, Tensor, backward

EPS = 1e-5
REL_TOL = 1e-4
# denominators are floored here so entries that are zero in both routes do not divide by ~0
REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    entries: int

    @property
    def ok(self):
        return self.max_rel_error < REL_TOL


def relative_error(analytic, numeric, floor=REL_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check(loss_fn, tensors, eps=EPS, max_entries=None, rng=None):
    """Compare backward() against central differences for every tensor in ``tensors``.

    ``loss_fn`` rebuilds the scalar loss from the current tensor values. Leaves that
    are not parameters must have ``requires_grad=True``. When ``max_entries`` is
    given, a random subset of at most that many entries per tensor is probed.
    """
    rng = rng or np.random.default_rng(0)
    for t in tensors:
        if isinstance(t, Parameter):
            t.zero_grad()
        else:
            t.grad = None
    loss = loss_fn()
    backward(loss, None)
    results = []
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(idx.size)
        for n, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(loss_fn().data)
            flat[i] = orig - eps
            fm = float(loss_fn().data)
            flat[i] = orig
            numeric[n] = (fp - fm) / (2 * eps)
        err = relative_error(analytic.reshape(-1)[idx], numeric)
        results.append(GradCheckResult(t.name or "tensor", err, int(idx.size)))
    return results


def leaf(array, name=None):
    """Input tensor that collects gradients without being a parameter."""
    return Tensor(np.array(array, dtype=np.float64), requires_grad=True, name=name)


def projected(out, rng=None, weights=None):
    """Scalar ``sum(out * w)`` with fixed random weights, for checking non-scalar outputs."""
    from . import ops

    if weights is None:
        rng = rng or np.random.default_rng(1234)
        weights = rng.uniform(-1.0, 1.0, size=out.shape)
    return ops.total(ops.mul(out, weights))
