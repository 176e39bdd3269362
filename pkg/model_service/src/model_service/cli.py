"""Command-line entry point: train a checkpoint, then serve it."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import PRESETS, TrainConfig
from .serving import ModelServer
from .training import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dst-model-service", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a prompt-examples file")
    p.add_argument("--examples", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory to write")
    p.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--max-input-tokens", type=int, default=None)
    p.add_argument("--max-output-tokens", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init-from", default=None, help="existing checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a checkpoint over the wire protocol")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--endpoint", required=True, help="http://host:port or host:port (TCP)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pretrain", help="build a base checkpoint from the synthetic pointer-skills corpus")
    p.add_argument("--out", required=True, help="base checkpoint directory to write")
    p.add_argument("--vocab-from", action="append", default=[],
                   help="examples file whose tokens join the pretraining word pool (repeatable)")
    p.add_argument("--size", type=int, default=20000, help="number of synthetic examples")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    p.set_defaults(func=cmd_pretrain)

    return parser


def cmd_train(args: argparse.Namespace) -> int:
    config = PRESETS[args.preset]
    overrides = {
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "epochs": args.epochs,
        "max_input_tokens": args.max_input_tokens,
        "max_output_tokens": args.max_output_tokens,
        "seed": args.seed,
    }
    config = dataclasses.replace(
        config, **{k: v for k, v in overrides.items() if v is not None}
    )
    out = train(args.examples, config, args.out, init_from=args.init_from)
    print(f"checkpoint: {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    server = ModelServer(args.checkpoint, args.endpoint)
    print(f"serving {server.bound_endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    from .pretraining import pretrain

    out = pretrain(
        args.out,
        token_sources=args.vocab_from,
        n_examples=args.size,
        epochs=args.epochs,
        seed=args.seed,
        base_model=args.preset,
    )
    print(f"base checkpoint: {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level="INFO")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
