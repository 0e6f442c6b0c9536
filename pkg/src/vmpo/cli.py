"""Command line entry point: train, eval, plot, config-reference."""

from __future__ import annotations

import argparse
import logging
import sys

from .checkpoint import CheckpointError
from .config import config_reference, load_config


def _train(args):
    from .trainer import train
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out, learn_steps=args.steps)
    res = train(cfg)
    print(f"metrics: {res.metrics_path}")
    print(f"checkpoint: {res.checkpoint_path}")


def _eval(args):
    from .trainer import evaluate
    res = evaluate(args.checkpoint, args.episodes, args.seed, args.mode_actions, args.env)
    kind = "mode" if args.mode_actions else "sampled"
    print(f"episodes={len(res.returns)} actions={kind} mean={res.mean:.6g} "
          f"min={res.min:.6g} max={res.max:.6g}")


def _plot(args):
    from .plot import emit_plot
    for path in emit_plot(args.metrics, args.fields, args.out):
        print(path)


def _reference(args):
    sys.stdout.write(config_reference())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmpo", description="V-MPO training on toy environments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--steps", type=int, help="learn steps (overrides learn_steps)")
    p.set_defaults(func=_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode-actions", action="store_true", help="act with the mode/mean action")
    p.add_argument("--env", help="fail unless the checkpoint was trained on this env")
    p.set_defaults(func=_eval)

    p = sub.add_parser("plot", help="plot metrics columns against env frames as SVG")
    p.add_argument("--metrics", required=True)
    p.add_argument("--fields", required=True, help="comma-separated column names")
    p.add_argument("--out", help="output directory (default: next to the metrics file)")
    p.set_defaults(func=_plot)

    p = sub.add_parser("config-reference", help="print every config key with its default")
    p.set_defaults(func=_reference)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        args.func(args)
    except (ValueError, CheckpointError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
