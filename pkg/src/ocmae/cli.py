"""Command-line interface.

Subcommands:

    gen-data   render a synthetic dataset (images, masks, manifest)
    train      train a model, writing log.csv and checkpoints
    eval       segmentation metrics for a checkpoint on a dataset
    viz        qualitative reconstruction/segmentation grids

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
abort during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError, DataError, NumericalAbort

log = logging.getLogger("ocmae.cli")


def _add_config_args(p: argparse.ArgumentParser, default_config: str = "desk"):
    p.add_argument("--config", default=default_config,
                   help="config file path or preset name (default: %(default)s)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--seed", type=int, default=None,
                   help="override the run/scene seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocmae",
        description="Unsupervised object segmentation with a masked autoencoder")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render a synthetic dataset")
    _add_config_args(p)
    p.add_argument("--count", type=int, required=True, help="number of scenes")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train a model")
    _add_config_args(p)
    p.add_argument("--data", default=None, help="dataset directory (run.data_path)")
    p.add_argument("--out", default=None, help="run directory (run.out_dir)")
    p.add_argument("--resume", nargs="?", const="", default=None, metavar="CKPT",
                   help="resume from a checkpoint (default: "
                        "<out>/checkpoint_last.bin)")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", default=None, help="also write the JSON here")

    p = sub.add_parser("viz", help="write visualization grids")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=4, help="number of grids")
    return parser


def _load_kv(args) -> dict[str, str]:
    from .config import apply_overrides, load_kv
    return apply_overrides(load_kv(args.config), args.override)


def cmd_gen_data(args) -> int:
    from .config import build_scene_spec
    from .data import generate
    kv = _load_kv(args)
    spec = build_scene_spec(kv)
    if args.seed is not None:
        spec.seed = args.seed
    manifest = generate(spec, args.count, args.out)
    log.info("wrote %d samples to %s", args.count, args.out)
    print(manifest)
    return 0


def cmd_train(args) -> int:
    from .config import build_run_config
    from .train import fit
    kv = _load_kv(args)
    run = build_run_config(kv, validate=False)
    if args.data is not None:
        run.data_path = args.data
    if args.out is not None:
        run.out_dir = args.out
    if args.seed is not None:
        run.seed = args.seed
    run.validate()
    resume_from = None
    if args.resume is not None:
        resume_from = args.resume or os.path.join(run.out_dir, "checkpoint_last.bin")
    result = fit(run, resume_from=resume_from)
    if result.final_metrics is not None:
        print(json.dumps(result.final_metrics))
    return 0


def cmd_eval(args) -> int:
    from .data import load
    from .train import evaluate, load_model_for_eval
    model, run = load_model_for_eval(args.checkpoint)
    _, eval_split = load(args.data, run.split_fraction)
    metrics = evaluate(model, eval_split)
    text = json.dumps(metrics)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_viz(args) -> int:
    from .data import load
    from .train import load_model_for_eval
    from .viz import save_grids
    model, run = load_model_for_eval(args.checkpoint)
    _, eval_split = load(args.data, run.split_fraction)
    count = min(args.count, len(eval_split))
    if count == 0:
        raise DataError("no evaluation images to visualize")
    paths = save_grids(model, eval_split.images[:count], args.out)
    for p in paths:
        print(p)
    return 0


_COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train,
             "eval": cmd_eval, "viz": cmd_viz}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalAbort as exc:
        print(f"numerical abort: {exc} (epoch {exc.epoch}, step {exc.step})",
              file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
