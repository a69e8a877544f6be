"""LoRA training loop: frozen base, adapter-only updates, loss tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .config import FinetuneConfig
from .data import ChatDataset
from .lora import adapter_parameters, adapter_state_dict, apply_lora, trainable_fraction
from .model import ModelSize, TinyDecoderLM, build_model


class DivergedLoss(Exception):
    """Final evaluation loss exceeded twice the initial loss."""


@dataclass
class TrainResult:
    model: nn.Module
    adapter: dict[str, torch.Tensor]
    step_losses: list[float]
    # eval-mode full-dataset loss before training, then after each epoch
    epoch_losses: list[float]
    trainable_fraction: float

    @property
    def initial_loss(self) -> float:
        return self.epoch_losses[0]

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


@torch.no_grad()
def evaluate_loss(model: nn.Module, dataset: ChatDataset, batch_size: int = 8) -> float:
    model.eval()
    total, count = 0.0, 0
    for ids, mask in dataset.batches(batch_size):
        targets = int(mask[:, 1:].sum())
        if targets == 0:
            continue
        total += float(model.loss(ids, mask)) * targets
        count += targets
    model.train()
    return total / max(count, 1)


def train(
    config: FinetuneConfig,
    dataset: ChatDataset,
    model_size: ModelSize | None = None,
) -> TrainResult:
    """Train adapters for ``config.epochs`` epochs; base weights stay frozen."""
    torch.manual_seed(config.seed)
    model = build_model(model_size, seed=config.seed, bfloat16=config.load_in_bfloat16)
    apply_lora(model, config)
    params = adapter_parameters(model)
    optimizer = torch.optim.AdamW(params, lr=config.learning_rate)
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / max(config.warmup_steps, 1))
    )

    epoch_losses = [evaluate_loss(model, dataset)]
    step_losses: list[float] = []
    shuffler = torch.Generator().manual_seed(config.seed)
    model.train()
    for _epoch in range(config.epochs):
        order = torch.randperm(len(dataset), generator=shuffler).tolist()
        optimizer.zero_grad()
        for micro_step, (ids, mask) in enumerate(dataset.batches(config.batch_size, order)):
            loss = model.loss(ids, mask)
            (loss / config.grad_accum).backward()
            step_losses.append(float(loss.detach()))
            if (micro_step + 1) % config.grad_accum == 0:
                torch.nn.utils.clip_grad_norm_(params, 1.0)
                optimizer.step()
                schedule.step()
                optimizer.zero_grad()
        # flush a trailing partial accumulation window
        if any(p.grad is not None and p.grad.abs().sum() > 0 for p in params):
            torch.nn.utils.clip_grad_norm_(params, 1.0)
            optimizer.step()
            schedule.step()
            optimizer.zero_grad()
        epoch_losses.append(evaluate_loss(model, dataset))

    if epoch_losses[-1] > 2.0 * epoch_losses[0]:
        raise DivergedLoss(
            f"final loss {epoch_losses[-1]:.4f} > 2 x initial {epoch_losses[0]:.4f}"
        )
    return TrainResult(
        model=model,
        adapter=adapter_state_dict(model),
        step_losses=step_losses,
        epoch_losses=epoch_losses,
        trainable_fraction=trainable_fraction(model),
    )
