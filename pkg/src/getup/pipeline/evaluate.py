"""Metric tables and depth-map dumps for a trained model."""

from __future__ import annotations

import os

from ..core.tensor import no_grad
from ..metrics import CAPS, evaluate_frames, write_csv
from .config import RunConfig
from .frames import prepare_frame
from .images import depth_to_gray, write_pgm
from .model import GetUpModel
from .train import load_model


def predict(model: GetUpModel, scenes):
    """Centre-cropped predictions and the LiDAR ground truth they are scored against."""
    preds, gts = [], []
    with no_grad():
        for s in scenes:
            frame = prepare_frame(s, model.cfg)
            preds.append(model.forward(frame).depth.data)
            gts.append(frame.eval_gt)
    return preds, gts


def evaluate_model(model: GetUpModel, scenes, caps=CAPS, predictions=None):
    preds, gts = predictions if predictions is not None else predict(model, scenes)
    return [evaluate_frames(preds, gts, cap) for cap in caps]


def report_name(cfg: RunConfig):
    return f"metrics_{cfg.ablation_tag()}.csv"


def run_eval(checkpoint_path, cfg: RunConfig, scenes, out_dir, caps=CAPS, dump_depth=False, split="test"):
    """Write one CSV row per cap (file tagged by the ablation flags) and optional PGM depth maps."""
    model = load_model(checkpoint_path, cfg)
    preds, gts = predict(model, scenes)
    reports = evaluate_model(model, scenes, caps, (preds, gts))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, report_name(cfg))
    write_csv(path, reports, split)
    if dump_depth:
        for i, p in enumerate(preds):
            for cap in caps:
                write_pgm(os.path.join(out_dir, f"depth_{i:04d}_cap{int(cap)}.pgm"), depth_to_gray(p, cap))
    return path, reports
