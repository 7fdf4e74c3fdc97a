"""Command line entry point: ``gen``, ``train``, ``eval``, ``hist``, ``gradcheck``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import MISSING, fields

from ..errors import IO_EXIT_CODE, CheckpointError, ConfigError, GetUpError, GradientCheckFailed
from ..metrics import CAPS
from .config import ABLATION_FLAGS, RunConfig
from .scene import SceneSpec, generate_dataset, load_dataset

log = logging.getLogger("getup")


def _parse_list(text):
    text = text.strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = [json.loads(v) for v in text.split(",") if v.strip()]
    if not isinstance(value, list):
        raise argparse.ArgumentTypeError(f"expected a list, got {text!r}")
    return value


def _add_config_flags(p):
    g = p.add_argument_group("run configuration (override --config)")
    for f in fields(RunConfig):
        opts = [f"--{f.name}"]
        if "_" in f.name:
            opts.append(f"--{f.name.replace('_', '-')}")
        default = f.default if f.default is not MISSING else f.default_factory()
        kw = dict(dest=f.name, default=argparse.SUPPRESS, help=f"default {default!r}")
        if isinstance(default, bool):
            g.add_argument(*opts, action=argparse.BooleanOptionalAction, **kw)
        elif isinstance(default, list):
            g.add_argument(*opts, type=_parse_list, metavar="LIST", **kw)
        else:
            g.add_argument(*opts, type=type(default), **kw)
    g.add_argument("--ablate", default="", help=f"comma list of {', '.join(ABLATION_FLAGS)}")


def build_config(args, base_path=None) -> RunConfig:
    d = RunConfig().to_dict()
    path = getattr(args, "config", None) or base_path
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        d.update(RunConfig.load(path).to_dict())
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            d[f.name] = getattr(args, f.name)
    for flag in filter(None, (s.strip() for s in getattr(args, "ablate", "").split(","))):
        if flag not in ABLATION_FLAGS:
            raise ConfigError(f"unknown ablation flag {flag!r}")
        d[flag] = True
    return RunConfig.from_dict(d)


def _parse_caps(text):
    try:
        caps = tuple(float(c) for c in text.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cap list {text!r}") from None
    if not caps or any(c <= 0 for c in caps):
        raise argparse.ArgumentTypeError("caps must be positive")
    return caps


def make_parser():
    p = argparse.ArgumentParser(prog="getup", description="Radar-camera depth estimation at desk scale.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scene dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--height", type=int, default=SceneSpec.height)
    g.add_argument("--width", type=int, default=SceneSpec.width)
    g.add_argument("--focal", type=float, default=SceneSpec.focal)
    g.add_argument("--noise-free", action="store_true", help="exact radar: heights kept, no noise")
    g.add_argument("--position-noise", type=float, default=SceneSpec.position_noise)
    g.add_argument("--depth-noise", type=float, default=SceneSpec.depth_noise)
    g.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="JSON RunConfig to start from")
    t.add_argument("--log-every", type=int, default=10)
    _add_config_flags(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--config", help="defaults to config.json beside the checkpoint")
    e.add_argument("--caps", type=_parse_caps, default=CAPS)
    e.add_argument("--dump-depth", action="store_true", help="write PGM depth maps per cap")
    e.add_argument("--split", default="test")
    _add_config_flags(e)

    h = sub.add_parser("hist", help="radar/LiDAR depth discrepancy histogram")
    h.add_argument("--data", required=True)
    h.add_argument("--out", required=True)

    c = sub.add_parser("gradcheck", help="finite-difference check of every learnable block")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--eps", type=float, default=None)
    return p


def cmd_gen(args):
    if args.noise_free:
        spec = SceneSpec.noise_free(height=args.height, width=args.width, focal=args.focal)
    else:
        spec = SceneSpec(height=args.height, width=args.width, focal=args.focal,
                         position_noise=args.position_noise, depth_noise=args.depth_noise)
    generate_dataset(args.out, args.count, args.seed, spec, workers=args.workers)
    print(f"wrote {args.count} scenes to {args.out}")


def cmd_train(args):
    from .train import train

    cfg = build_config(args)
    scenes = load_dataset(args.data)
    every = max(1, args.log_every)

    def progress(row):
        if row[0] % every == 0 or row[0] == cfg.iterations - 1:
            log.info("iter %d lr %.3g loss %.4f depth %.4f up %.4f", *row)

    res = train(cfg, scenes, args.out, progress)
    print(f"trained {cfg.iterations} iterations; final loss {res.trace[-1][2]:.6g}; outputs in {args.out}")


def cmd_eval(args):
    from .evaluate import run_eval

    if not os.path.isfile(args.checkpoint):
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    beside = os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)), "config.json")
    cfg = build_config(args, beside if os.path.isfile(beside) else None)
    scenes = load_dataset(args.data)
    path, reports = run_eval(args.checkpoint, cfg, scenes, args.out, args.caps, args.dump_depth, args.split)
    for r in reports:
        print(f"cap {r.eval_cap:g} m: MAE {r.mae:.4f} RMSE {r.rmse:.4f} AbsRel {r.absrel:.4f} d1 {r.delta1:.4f}")
    print(f"wrote {path}")


def cmd_hist(args):
    from .histogram import dataset_histogram, mass_beyond, write_histogram

    counts = dataset_histogram(load_dataset(args.data))
    write_histogram(args.out, counts)
    print(f"{int(counts.sum())} detections; {100 * mass_beyond(counts, 1.0):.1f}% beyond 1 m; wrote {args.out}")


def cmd_gradcheck(args):
    from ..core.gradcheck import EPS, REL_TOL
    from ..gradsuite import run_suite

    eps = args.eps if args.eps is not None else EPS

    def report(r):
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name:40s} max rel err {r.max_rel_error:.3e} ({r.entries} entries)")

    results, secs = run_suite(seed=args.seed, eps=eps, report=report)
    bad = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(bad)}/{len(results)} passed at eps={eps:g}, tol={REL_TOL:g} in {secs:.1f}s")
    if bad:
        raise GradientCheckFailed(f"gradient check failed: {', '.join(bad)}")


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "hist": cmd_hist, "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except GetUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE
    return 0


if __name__ == "__main__":
    sys.exit(main())
