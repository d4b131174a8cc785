"""nas-trainer command line: serve the evaluation protocol on stdio."""

from __future__ import annotations

import argparse
import logging
import sys

from .protocol import serve
from .session import TrainerSession


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nas-trainer")
    sub = parser.add_subparsers(dest="command", required=True)
    p_serve = sub.add_parser("serve", help="speak the evaluation protocol on stdin/stdout")
    p_serve.add_argument("--dataset", choices=["synthetic", "cifar10"], default="synthetic")
    p_serve.add_argument("--data-dir", default="data")
    p_serve.add_argument("--checkpoint-dir", default="checkpoints")
    p_serve.add_argument("--max-epochs", type=int, default=25,
                         help="cosine schedule period (complete epochs)")
    p_serve.add_argument("--batch-size", type=int, default=128)
    p_serve.add_argument("--lr", type=float, default=0.1)
    p_serve.add_argument("--momentum", type=float, default=0.9)
    p_serve.add_argument("--weight-decay", type=float, default=3e-4)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    session = TrainerSession(
        dataset=args.dataset,
        data_dir=args.data_dir,
        checkpoint_dir=args.checkpoint_dir,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        seed=args.seed,
        device=args.device,
    )
    return serve(session)


if __name__ == "__main__":
    sys.exit(main())
