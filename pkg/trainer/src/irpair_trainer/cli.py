"""Sidecar CLI: train adapters, serve a checkpoint, score pairs."""

from __future__ import annotations

import argparse
import sys

from .score import ScoreError, score_pairs
from .serve import serve
from .train import TrainConfig, TrainerError, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irpair-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fine-tune adapters on trainer-contract files")
    p_train.add_argument("--train", required=True, dest="train_file")
    p_train.add_argument("--val", required=True, dest="val_file")
    p_train.add_argument("--role", required=True, choices=("inversion", "downstream"))
    p_train.add_argument("--out", required=True, help="checkpoint directory")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--max-steps", type=int, default=400)
    p_train.add_argument("--batch-size", type=int, default=10)
    p_train.add_argument("--rank", type=int, default=16)
    p_train.add_argument("--alpha", type=float, default=32.0)
    p_train.add_argument("--base-model", default="tiny-decoder")

    p_serve = sub.add_parser("serve", help="serve a checkpoint over the gateway wire protocol")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--host", default="127.0.0.1")

    p_score = sub.add_parser("score", help="optional similarity scoring of synthetic pairs")
    p_score.add_argument("--pairs", required=True)
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--embedder", default="builtin-hash")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = TrainConfig(
                base_model=args.base_model,
                adapter_rank=args.rank,
                adapter_alpha=args.alpha,
                batch_size=args.batch_size,
                max_steps=args.max_steps,
                seed=args.seed,
            )
            result = train(args.train_file, args.val_file, config, args.role, args.out)
            print(result.best.path)
            return 0
        if args.command == "serve":
            serve(args.checkpoint, args.port, args.host)
            return 0
        if args.command == "score":
            outcome = score_pairs(args.pairs, args.out, args.embedder)
            print(f"{outcome.status}: {outcome.scored} pairs {outcome.detail}".strip())
            return 0
    except (TrainerError, ScoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
