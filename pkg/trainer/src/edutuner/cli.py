"""Trainer command line: `edutuner train` and `edutuner generate`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .data import SchemaError
from .generate import generate
from .train import TrainRun, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edutuner", description=__doc__)
    parser.add_argument("--version", action="version", version=f"edutuner {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune adapters on an exported dataset")
    p.add_argument("--data-dir", required=True, help="dataset export directory")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--model", default="local-tiny")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="one hypothesis per prompt, in order")
    p.add_argument("--prompts", required=True, help="dataset-format JSONL with prompts")
    p.add_argument("--out", required=True, help="hypotheses JSONL")
    p.add_argument("--adapter", help="adapter directory from train; omit for zero-shot")
    p.add_argument("--model", default="local-tiny")
    p.add_argument("--max-new-tokens", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            run = TrainRun(
                data_dir=Path(args.data_dir),
                out_dir=Path(args.out),
                model_id=args.model,
                seed=args.seed,
            )
            adapter_dir = train(run)
            last_step, last_loss, last_bleu = run.eval_log[-1]
            print(
                f"trained: adapter at {adapter_dir}; "
                f"final step {last_step}, loss {last_loss:.4f}, BLEU {last_bleu:.2f}",
                file=sys.stderr,
            )
        else:
            count = generate(
                prompts_file=args.prompts,
                out_file=args.out,
                adapter_dir=args.adapter,
                model_id=args.model,
                max_new_tokens=args.max_new_tokens,
                seed=args.seed,
            )
            print(f"wrote {count} hypotheses to {args.out}", file=sys.stderr)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
