"""Small stand-in decoder LM whose per-layer projections carry the same
names as the tuning recipe's target modules (q, k, v, o, gate, up, down)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F


@dataclass(frozen=True)
class ModelSize:
    vocab_size: int = 16384
    d_model: int = 384
    n_heads: int = 6
    d_ff: int = 1536
    n_layers: int = 2
    max_positions: int = 700


class DecoderLayer(nn.Module):
    def __init__(self, size: ModelSize):
        super().__init__()
        d = size.d_model
        self.n_heads = size.n_heads
        self.head_dim = d // size.n_heads
        self.ln_attn = nn.LayerNorm(d)
        self.q = nn.Linear(d, d, bias=False)
        self.k = nn.Linear(d, d, bias=False)
        self.v = nn.Linear(d, d, bias=False)
        self.o = nn.Linear(d, d, bias=False)
        self.ln_mlp = nn.LayerNorm(d)
        self.gate = nn.Linear(d, size.d_ff, bias=False)
        self.up = nn.Linear(d, size.d_ff, bias=False)
        self.down = nn.Linear(size.d_ff, d, bias=False)

    def _attend(self, x: torch.Tensor) -> torch.Tensor:
        batch, seq, d = x.shape
        shape = (batch, seq, self.n_heads, self.head_dim)
        q = self.q(x).view(shape).transpose(1, 2)
        k = self.k(x).view(shape).transpose(1, 2)
        v = self.v(x).view(shape).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        mask = torch.triu(
            torch.full((seq, seq), float("-inf"), device=x.device), diagonal=1
        )
        weights = torch.softmax(scores + mask, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(batch, seq, d)
        return self.o(out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self._attend(self.ln_attn(x))
        h = self.ln_mlp(x)
        return x + self.down(F.silu(self.gate(h)) * self.up(h))


class TinyDecoderLM(nn.Module):
    def __init__(self, size: ModelSize | None = None):
        super().__init__()
        self.size = size or ModelSize()
        self.tok_embed = nn.Embedding(self.size.vocab_size, self.size.d_model)
        self.pos_embed = nn.Embedding(self.size.max_positions, self.size.d_model)
        self.layers = nn.ModuleList(
            DecoderLayer(self.size) for _ in range(self.size.n_layers)
        )
        self.ln_f = nn.LayerNorm(self.size.d_model)
        self.lm_head = nn.Linear(self.size.d_model, self.size.vocab_size, bias=False)

    def forward(self, input_ids: torch.Tensor) -> torch.Tensor:
        seq = input_ids.shape[1]
        positions = torch.arange(seq, device=input_ids.device)
        x = self.tok_embed(input_ids) + self.pos_embed(positions)[None, :, :]
        for layer in self.layers:
            x = layer(x)
        return self.lm_head(self.ln_f(x))

    def loss(self, input_ids: torch.Tensor, label_mask: torch.Tensor) -> torch.Tensor:
        """Next-token cross-entropy restricted to positions whose *target*
        token is inside an assistant span (label_mask marks targets)."""
        logits = self.forward(input_ids[:, :-1])
        targets = input_ids[:, 1:]
        mask = label_mask[:, 1:].bool()
        flat_logits = logits.reshape(-1, logits.shape[-1])[mask.reshape(-1)]
        flat_targets = targets.reshape(-1)[mask.reshape(-1)]
        return F.cross_entropy(flat_logits.float(), flat_targets)


def build_model(size: ModelSize | None = None, *, seed: int = 0, bfloat16: bool = False) -> TinyDecoderLM:
    torch.manual_seed(seed)
    model = TinyDecoderLM(size)
    if bfloat16:
        model = model.to(torch.bfloat16)
    return model
