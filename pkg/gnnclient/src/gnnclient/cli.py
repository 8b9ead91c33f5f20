"""Command line: train a model on a dataset variant, roll it out to
prediction files the benchmark evaluator accepts."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .container import read_manifest
from .rollout import rollout_split
from .training import TrainConfig, Trainer, load_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnnclient")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the message-passing model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=0.999)
    p.add_argument("--hidden", type=int, default=48)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--windows-per-epoch", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("rollout", help="write prediction files for a split")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--horizon", type=int, default=250)
    p.add_argument("--oracle", action="store_true",
                   help="replay true increments (plumbing check)")
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        config = TrainConfig(epochs=args.epochs, lr=args.lr, lr_decay=args.lr_decay,
                             hidden=args.hidden, layers=args.layers,
                             windows_per_epoch=args.windows_per_epoch,
                             seed=args.seed)
        trainer = Trainer(args.data, args.variant, config)
        history = trainer.train()
        trainer.save(args.out, history)
        print(f"saved checkpoint to {args.out}")
        return 0

    model, norm, _payload = load_model(args.ckpt)
    manifest = read_manifest(args.data, args.variant)
    horizon = min(args.horizon, manifest.steps)
    files = rollout_split(model, norm, args.data, args.variant, args.split,
                          horizon, args.out, oracle=args.oracle)
    print(f"wrote {len(files)} prediction files under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
