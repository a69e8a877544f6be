"""Hyperparameter search over the tuning recipe's space with any sampler.

Random sampling here; the search-space contract (bounds, choices, fixed
values) is what matters, and the best trial's config and loss persist to a
JSON log.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import (
    ALPHA_BOUNDS,
    DROPOUT_CHOICES,
    LEARNING_RATE_BOUNDS,
    RANK_BOUNDS,
    TARGET_MODULE_NAMES,
    FinetuneConfig,
)
from .data import ChatDataset, ChatTokenizer
from .model import ModelSize
from .train import train


@dataclass(frozen=True)
class SearchSpace:
    rank_bounds: tuple[int, int] = RANK_BOUNDS
    alpha_bounds: tuple[int, int] = ALPHA_BOUNDS
    dropout_choices: tuple[float, ...] = DROPOUT_CHOICES
    learning_rate_bounds: tuple[float, float] = LEARNING_RATE_BOUNDS
    target_modules: tuple[str, ...] = TARGET_MODULE_NAMES
    epochs: int = 5
    grad_accum: int = 2
    warmup_steps: int = 100
    max_token_length: int = 700


def sample_config(space: SearchSpace, rng: random.Random, **overrides) -> FinetuneConfig:
    """One draw: integer rank/alpha, dropout choice, log-uniform lr."""
    log_lo, log_hi = (math.log(b) for b in space.learning_rate_bounds)
    return FinetuneConfig(
        lora_rank=rng.randint(*space.rank_bounds),
        lora_alpha=rng.randint(*space.alpha_bounds),
        lora_dropout=rng.choice(space.dropout_choices),
        learning_rate=math.exp(rng.uniform(log_lo, log_hi)),
        target_modules=space.target_modules,
        epochs=space.epochs,
        grad_accum=space.grad_accum,
        warmup_steps=space.warmup_steps,
        max_token_length=space.max_token_length,
        **overrides,
    )


@dataclass
class Trial:
    number: int
    config: FinetuneConfig
    loss: float


@dataclass
class HpoResult:
    best: Trial
    trials: list[Trial]

    def to_dict(self) -> dict:
        def trial_dict(t: Trial) -> dict:
            return {
                "number": t.number,
                "loss": t.loss,
                "config": {
                    "lora_rank": t.config.lora_rank,
                    "lora_alpha": t.config.lora_alpha,
                    "lora_dropout": t.config.lora_dropout,
                    "learning_rate": t.config.learning_rate,
                    "target_modules": list(t.config.target_modules),
                },
            }

        return {"best": trial_dict(self.best), "trials": [trial_dict(t) for t in self.trials]}


def hpo_search(
    space: SearchSpace,
    n_trials: int,
    objective: Callable[[FinetuneConfig], float],
    *,
    seed: int = 0,
    log_path: str | Path | None = None,
) -> HpoResult:
    """Sample ``n_trials`` configs from the space, score each with the
    objective (lower is better), persist the log, return the argmin."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = random.Random(seed)
    trials = []
    for number in range(n_trials):
        config = sample_config(space, rng)
        trials.append(Trial(number=number, config=config, loss=objective(config)))
    best = min(trials, key=lambda t: t.loss)
    result = HpoResult(best=best, trials=trials)
    if log_path is not None:
        Path(log_path).write_text(
            json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    return result


def validation_objective(
    pairs: list[dict],
    tokenizer: ChatTokenizer,
    model_size: ModelSize | None = None,
    *,
    val_fraction: float = 0.2,
    seed: int = 0,
) -> Callable[[FinetuneConfig], float]:
    """Objective that trains on one slice of the pairs and scores loss on a
    held-out validation slice."""
    from .data import prepare_chat_dataset
    from .train import evaluate_loss

    shuffled = list(pairs)
    random.Random(seed).shuffle(shuffled)
    n_val = max(1, round(val_fraction * len(shuffled)))
    val_pairs, train_pairs = shuffled[:n_val], shuffled[n_val:]
    if not train_pairs:
        raise ValueError("not enough pairs to hold out a validation slice")
    train_set = prepare_chat_dataset(train_pairs, tokenizer)
    val_set = prepare_chat_dataset(val_pairs, tokenizer)

    def objective(config: FinetuneConfig) -> float:
        result = train(config, train_set, model_size)
        return evaluate_loss(result.model, val_set)

    return objective
