"""CLI: train adapters or run a hyperparameter search over a QA dataset."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import FinetuneConfig, load_preset
from .data import build_tokenizer_for_pairs, prepare_chat_dataset, read_qa_pairs
from .hpo import SearchSpace, hpo_search, validation_objective
from .lora import save_adapter
from .model import ModelSize
from .train import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="course-finetune",
        description="Desk-scale LoRA fine-tuning harness for course QA datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train adapters on a QA dataset")
    p.add_argument("--data", required=True, help="QA pairs JSONL (train split)")
    p.add_argument("--out", required=True, help="adapter output directory")
    p.add_argument("--preset", default="published-best")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("hpo", help="random search over the tuning space")
    p.add_argument("--data", required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--log", required=True, help="JSON trial log path")
    p.add_argument("--seed", type=int, default=0)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    pairs = [p for p in read_qa_pairs(args.data) if p.get("split", "train") == "train"]
    tokenizer = build_tokenizer_for_pairs(pairs)

    if args.command == "train":
        config = load_preset(args.preset, seed=args.seed)
        dataset = prepare_chat_dataset(pairs, tokenizer, config.max_token_length)
        result = train(config, dataset)
        out = save_adapter(result.model, config, args.out)
        tokenizer.save(Path(args.out) / "tokenizer.json")
        (Path(args.out) / "loss_curve.json").write_text(
            json.dumps(
                {"epoch_losses": result.epoch_losses, "step_losses": result.step_losses}
            )
            + "\n",
            encoding="utf-8",
        )
        print(
            f"trained {config.epochs} epochs: loss {result.initial_loss:.4f} -> "
            f"{result.final_loss:.4f}; trainable fraction "
            f"{result.trainable_fraction:.2%}; adapter at {out}"
        )
        return 0

    if args.command == "hpo":
        objective = validation_objective(pairs, tokenizer)
        result = hpo_search(
            SearchSpace(), args.trials, objective, seed=args.seed, log_path=args.log
        )
        print(
            f"{args.trials} trials; best loss {result.best.loss:.4f} with rank "
            f"{result.best.config.lora_rank}, alpha {result.best.config.lora_alpha}, "
            f"lr {result.best.config.learning_rate:.2e}; log at {args.log}"
        )
        return 0

    return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
