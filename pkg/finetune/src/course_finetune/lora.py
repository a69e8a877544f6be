"""Low-rank adapters: frozen base linears plus trainable A/B factor pairs."""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch import nn

from .config import FinetuneConfig


class LoRALinear(nn.Module):
    """y = base(x) + (dropout(x) @ A^T) @ B^T * (alpha / rank).

    B starts at zero, so the wrapped module is exactly the base module at
    initialization; only A and B receive gradients.
    """

    def __init__(self, base: nn.Linear, rank: int, alpha: int, dropout: float):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.rank = rank
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.normal_(self.lora_a, std=1.0 / rank)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = self.dropout(x) @ self.lora_a.T @ self.lora_b.T
        return self.base(x) + update.to(x.dtype) * self.scaling


def apply_lora(model: nn.Module, config: FinetuneConfig) -> nn.Module:
    """Freeze the whole model, then wrap each named target projection of
    every decoder layer with a trainable adapter."""
    for param in model.parameters():
        param.requires_grad_(False)
    wrapped = 0
    for layer in model.layers:
        for name in config.target_modules:
            base = getattr(layer, name)
            if not isinstance(base, nn.Linear):
                raise TypeError(f"target module {name!r} is not a Linear")
            setattr(
                layer,
                name,
                LoRALinear(base, config.lora_rank, config.lora_alpha, config.lora_dropout),
            )
            wrapped += 1
    if wrapped == 0:
        raise ValueError("no target modules were wrapped")
    return model


def adapter_parameters(model: nn.Module) -> list[nn.Parameter]:
    return [p for p in model.parameters() if p.requires_grad]


def trainable_fraction(model: nn.Module) -> float:
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable / total


def adapter_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }


def base_state_bytes(model: nn.Module) -> dict[str, bytes]:
    """Frozen-weight snapshot for bit-identity checks."""
    return {
        name: tensor.detach().cpu().numpy().tobytes()
        for name, tensor in model.state_dict().items()
        if "lora_a" not in name and "lora_b" not in name
    }


def save_adapter(model: nn.Module, config: FinetuneConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state_dict(model), out / "adapter.pt")
    (out / "adapter_config.json").write_text(
        json.dumps(
            {
                "base_model_id": config.base_model_id,
                "lora_rank": config.lora_rank,
                "lora_alpha": config.lora_alpha,
                "lora_dropout": config.lora_dropout,
                "target_modules": list(config.target_modules),
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    return out
