"""Fine-tuning configuration with hard search-space bounds.

The bounds mirror the tuning recipe this harness reproduces at desk scale;
the published best configuration is available as the ``published-best``
preset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

RANK_BOUNDS = (8, 64)
ALPHA_BOUNDS = (32, 128)
DROPOUT_CHOICES = (0.05, 0.1)
LEARNING_RATE_BOUNDS = (1e-5, 1e-3)
TARGET_MODULE_NAMES = ("q", "k", "v", "o", "gate", "up", "down")

# The fine-tuned course-professor persona used as the system message of
# every training example.
EXPERT_SYSTEM_PROMPT = (
    "You are an AI professor for a Finite Element Method (FEM) course. "
    "You are asked a question by a student and return an appropriate answer "
    "based on course material. Your response focuses on FEM fundamentals, "
    "theories, and applications as presented in the course. Use standard "
    "latex notation when replying with mathematical notation."
)


@dataclass(frozen=True)
class FinetuneConfig:
    base_model_id: str = "tiny-decoder"
    lora_rank: int = 16
    lora_alpha: int = 32
    lora_dropout: float = 0.05
    target_modules: tuple[str, ...] = TARGET_MODULE_NAMES
    learning_rate: float = 5e-5
    epochs: int = 5
    grad_accum: int = 2
    warmup_steps: int = 100
    max_token_length: int = 700
    batch_size: int = 4
    seed: int = 0
    load_in_bfloat16: bool = False

    def __post_init__(self) -> None:
        lo, hi = RANK_BOUNDS
        if not lo <= self.lora_rank <= hi:
            raise ValueError(f"lora_rank {self.lora_rank} outside [{lo}, {hi}]")
        lo, hi = ALPHA_BOUNDS
        if not lo <= self.lora_alpha <= hi:
            raise ValueError(f"lora_alpha {self.lora_alpha} outside [{lo}, {hi}]")
        if self.lora_dropout not in DROPOUT_CHOICES:
            raise ValueError(
                f"lora_dropout {self.lora_dropout} not in {DROPOUT_CHOICES}"
            )
        unknown = set(self.target_modules) - set(TARGET_MODULE_NAMES)
        if unknown or not self.target_modules:
            raise ValueError(f"target_modules must be a non-empty subset of "
                             f"{TARGET_MODULE_NAMES}, got {self.target_modules}")
        lo, hi = LEARNING_RATE_BOUNDS
        if not lo <= self.learning_rate <= hi and self.learning_rate != 0.0:
            # learning_rate == 0.0 is allowed for no-op smoke tests only.
            raise ValueError(f"learning_rate {self.learning_rate} outside [{lo}, {hi}]")
        if self.max_token_length < 1 or self.epochs < 1 or self.grad_accum < 1:
            raise ValueError("epochs, grad_accum and max_token_length must be positive")


# Best configuration found by the original hyperparameter search.
PRESETS = {
    "published-best": FinetuneConfig(
        lora_rank=45,
        lora_alpha=65,
        lora_dropout=0.05,
        learning_rate=5e-5,
    ),
}


def load_preset(name: str, **overrides) -> FinetuneConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    config = PRESETS[name]
    return replace(config, **overrides) if overrides else config
