"""Standard dense-depth error metrics over capped, valid ground-truth pixels."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import DataError

CAPS = (50.0, 70.0, 80.0)


@dataclass(frozen=True)
class MetricReport:
    mae: float
    rmse: float
    absrel: float
    log10: float
    rmselog: float
    delta1: float
    delta2: float
    delta3: float
    eval_cap: float
    pixel_count: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return list(astuple(self))


def valid_mask(gt, cap, valid=None):
    gt = np.asarray(gt, dtype=np.float64)
    m = (gt > 0) & (gt <= cap)
    if valid is not None:
        m &= np.asarray(valid, dtype=bool)
    return m


def metrics_from_pixels(pred, gt, cap) -> MetricReport:
    """Metrics over already-selected pixel values (1-D arrays)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    n = gt.size
    if n == 0:
        raise DataError(f"no valid ground-truth pixels within {cap} m")
    if np.any(pred <= 0):
        raise DataError("predicted depths must be positive")
    err = pred - gt
    ratio = np.maximum(pred / gt, gt / pred)
    return MetricReport(
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        absrel=float(np.mean(np.abs(err) / gt)),
        log10=float(np.mean(np.abs(np.log10(pred) - np.log10(gt)))),
        rmselog=float(np.sqrt(np.mean((np.log(pred) - np.log(gt)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        eval_cap=float(cap),
        pixel_count=int(n),
    )


def evaluate(pred, gt, cap=80.0, valid=None) -> MetricReport:
    """Metrics of predicted depth ``pred`` against ``gt`` over pixels with 0 < gt <= cap."""
    m = valid_mask(gt, cap, valid)
    return metrics_from_pixels(np.asarray(pred)[m], np.asarray(gt)[m], cap)


def evaluate_frames(preds, gts, cap=80.0, valids=None) -> MetricReport:
    """Pixels of all frames pooled in frame order, then one report."""
    p_all, g_all = [], []
    valids = valids if valids is not None else [None] * len(gts)
    for p, g, v in zip(preds, gts, valids):
        m = valid_mask(g, cap, v)
        p_all.append(np.asarray(p)[m])
        g_all.append(np.asarray(g)[m])
    return metrics_from_pixels(np.concatenate(p_all), np.concatenate(g_all), cap)


def write_csv(path, reports, split="test"):
    """One row per report, columns ``split`` then the MetricReport fields in order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split"] + MetricReport.columns())
        for r in reports:
            w.writerow([split] + [repr(v) if isinstance(v, float) else v for v in r.row()])
