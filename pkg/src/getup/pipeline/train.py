"""Training loop: Adam with polynomial decay over per-frame accumulated gradients."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from ..core import checkpoint
from ..core.optim import Adam, poly_lr
from ..core.tensor import backward, no_grad
from ..errors import CheckpointError, DataError, NonFiniteError, ShapeError, TrainingDiverged
from .config import RunConfig
from .frames import prepare_frame, single_scan_mask
from .model import GetUpModel

TRACE_COLUMNS = ["iteration", "lr", "total", "depth", "upsample"]


@dataclass
class TrainResult:
    model: GetUpModel
    trace: list = field(default_factory=list)  # rows matching TRACE_COLUMNS


class BatchSchedule:
    """Deterministic shuffled epochs over ``n`` scenes."""

    def __init__(self, n, rng):
        self.n = n
        self.rng = rng
        self.queue = []

    def next(self, size):
        out = []
        while len(out) < size:
            if not self.queue:
                self.queue = list(self.rng.permutation(self.n))
            out.append(int(self.queue.pop(0)))
        return out


def _check_grads(store, iteration):
    for name, p in store:
        if not np.isfinite(p.grad).all():
            raise TrainingDiverged(f"iteration {iteration}: non-finite gradient in {name}")


def train(cfg: RunConfig, scenes, out_dir=None, progress=None) -> TrainResult:
    """Run ``cfg.iterations`` updates; write checkpoint, config and loss trace to ``out_dir``.

    ``lr(t) = lr0 * (1 - t/T)^p`` with ``t`` counted from zero. A non-finite
    loss or gradient aborts with ``TrainingDiverged``.
    """
    if not scenes:
        raise DataError("training needs at least one scene")
    model = GetUpModel(cfg)
    opt = Adam(model.store)
    rng = np.random.default_rng([cfg.seed, 1])
    schedule = BatchSchedule(len(scenes), rng)
    masks = [single_scan_mask(s, cfg.ds_fraction) for s in scenes]
    result = TrainResult(model)
    T = cfg.iterations
    for t in range(T):
        lr = poly_lr(cfg.lr, t, T, cfg.lr_power)
        batch = schedule.next(cfg.batch_size)
        tot = dep = 0.0
        ups = []
        for j, i in enumerate(batch):
            frame = prepare_frame(scenes[i], cfg, rng, masks[i])
            try:
                out = model.forward(frame)
                parts = model.loss(frame, out)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"iteration {t}, scene {i}: {exc}") from None
            if not np.isfinite(parts.total.data):
                raise TrainingDiverged(f"iteration {t}, scene {i}: loss is not finite")
            backward(parts.total, model.store, accumulate=j > 0)
            tot += float(parts.total.data)
            dep += parts.depth
            if parts.upsample is not None:
                ups.append(parts.upsample)
        _check_grads(model.store, t)
        opt.step(lr, scale=1.0 / len(batch))
        n = len(batch)
        row = [t, lr, tot / n, dep / n, float(np.mean(ups)) if ups else float("nan")]
        result.trace.append(row)
        if progress is not None:
            progress(row)
    if out_dir is not None:
        save_run(out_dir, cfg, model, result.trace)
    return result


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def save_run(out_dir, cfg, model, trace):
    os.makedirs(out_dir, exist_ok=True)
    checkpoint.save(os.path.join(out_dir, "checkpoint.bin"), model.store)
    cfg.save(os.path.join(out_dir, "config.json"))
    write_trace(os.path.join(out_dir, "loss_trace.csv"), trace)


def load_model(checkpoint_path, cfg: RunConfig) -> GetUpModel:
    model = GetUpModel(cfg)
    try:
        model.store.load_state(checkpoint.load(checkpoint_path))
    except (KeyError, ShapeError) as exc:
        raise CheckpointError(f"checkpoint does not match the configured model: {exc}") from None
    return model


@dataclass
class SetLoss:
    total: float
    depth: float
    chamfer: float | None


def dataset_loss(model: GetUpModel, scenes) -> SetLoss:
    """Mean total / depth loss and mean R_up chamfer over ``scenes`` (centre crop, no flip)."""
    cfg = model.cfg
    tot, dep, ch = [], [], []
    with no_grad():
        for s in scenes:
            frame = prepare_frame(s, cfg)
            out = model.forward(frame)
            parts = model.loss(frame, out)
            tot.append(float(parts.total.data))
            dep.append(parts.depth)
            c = model.upsample_chamfer(frame, out)
            if c is not None:
                ch.append(c)
    return SetLoss(float(np.mean(tot)), float(np.mean(dep)), float(np.mean(ch)) if ch else None)
