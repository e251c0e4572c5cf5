"""Command line for serving and fine-tuning."""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig
from .service import serve
from .training import (
    finetune_generator,
    finetune_reranker,
    read_generator_examples,
    read_reranker_batches,
)


def _config_from(args) -> AdapterConfig:
    config = AdapterConfig.from_file(args.config) if args.config else AdapterConfig()
    for name in ("train_steps", "learning_rate", "batch_size", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qaserve", description=__doc__)
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the /score and /generate service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8808)

    for name, help_text in (
        ("train-reranker", "fine-tune the cross-encoder on sampled batches"),
        ("train-generator", "fine-tune the generator on prefixed targets"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--train-steps", dest="train_steps", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--seed", type=int)

    args = parser.parse_args(argv)
    try:
        config = _config_from(args)
        if args.command == "serve":
            serve(config, host=args.host, port=args.port)
            return 0
        if args.command == "train-reranker":
            result = finetune_reranker(read_reranker_batches(args.data), config, args.out)
        else:
            result = finetune_generator(read_generator_examples(args.data), config, args.out)
        print(f"{args.command}: loss {result.initial_loss:.4f} -> {result.final_loss:.4f}; "
              f"checkpoints: {', '.join(str(p) for p in result.checkpoints)}")
        return 0
    except (OSError, ValueError) as exc:
        print(f"qaserve {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
