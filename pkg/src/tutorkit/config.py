"""Application configuration: provider endpoints, per-mode expert models,
and inquiry defaults. Merge precedence: environment > CLI flags > file.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .embedding import EmbeddingProviderConfig
from .inquiry import ExpertConfig, ExpertMode, SynthesisConfig

# Environment overrides (applied last).
ENV_PREFIX = "TUTORKIT_"
_ENV_KEYS = {
    "EMBED_ENDPOINT": ("embedding", "endpoint_url"),
    "EMBED_MODEL": ("embedding", "model_id"),
    "SYNTHESIS_ENDPOINT": ("synthesis", "endpoint_url"),
    "SYNTHESIS_MODEL": ("synthesis", "model_id"),
    "EXPERT_ENDPOINT": ("expert", "endpoint_url"),
    "EXPERT_MODEL": ("expert", "model_id"),
}


@dataclass
class InquiryDefaults:
    expert_mode: str = "tuned"
    k_video: int = 2
    k_textbook: int = 2
    max_tokens_per_content: int = 700
    temperature: float = 0.2
    top_p: float = 1.0
    max_new_tokens: int = 1024
    num_beams: int = 1


@dataclass
class AppConfig:
    embedding: EmbeddingProviderConfig = field(
        default_factory=lambda: EmbeddingProviderConfig(
            endpoint_url="http://localhost:8001/v1/embeddings",
            model_id="text-embedding-3-large",
        )
    )
    synthesis: SynthesisConfig = field(
        default_factory=lambda: SynthesisConfig(
            endpoint_url="http://localhost:8002/v1/chat/completions",
            model_id="gpt-4o-mini",
        )
    )
    # Optional separate model for evaluation-time embeddings; falls back to
    # the retrieval embedding config when unset.
    eval_embedding: EmbeddingProviderConfig | None = None
    expert_modes: dict[str, ExpertConfig] = field(default_factory=dict)
    defaults: InquiryDefaults = field(default_factory=InquiryDefaults)
    subject_matter: str = "Finite Element Method (FEM)"
    max_concurrent_provider_calls: int = 4
    request_log_path: str | None = None
    # URL templates the web client uses to turn citations into links.
    video_url_template: str = "https://www.youtube.com/watch?v={video_id}&t={seconds}s"
    section_url_template: str = "#section-{section_id}"

    def __post_init__(self) -> None:
        if not self.expert_modes:
            self.expert_modes = {
                mode.value: ExpertConfig(
                    endpoint_url="http://localhost:8003/v1/chat/completions",
                    model_id=f"course-expert-{mode.value}",
                )
                for mode in ExpertMode
                if mode != ExpertMode.BYPASS
            }
        self.synthesis.subject_matter = self.subject_matter

    def expert_config(self, mode: ExpertMode) -> ExpertConfig:
        if mode == ExpertMode.BYPASS:
            raise ValueError("bypass mode has no expert config")
        return self.expert_modes[mode.value]

    @property
    def effective_eval_embedding(self) -> EmbeddingProviderConfig:
        return self.eval_embedding if self.eval_embedding is not None else self.embedding

    def to_dict(self) -> dict:
        return {
            "embedding": asdict(self.embedding),
            "eval_embedding": (
                asdict(self.eval_embedding) if self.eval_embedding else None
            ),
            "synthesis": asdict(self.synthesis),
            "expert_modes": {k: asdict(v) for k, v in self.expert_modes.items()},
            "defaults": asdict(self.defaults),
            "subject_matter": self.subject_matter,
            "max_concurrent_provider_calls": self.max_concurrent_provider_calls,
            "request_log_path": self.request_log_path,
            "video_url_template": self.video_url_template,
            "section_url_template": self.section_url_template,
        }


def load_config(path: str | Path | None = None) -> AppConfig:
    """Config file (JSON) -> AppConfig; omitted sections keep defaults."""
    config = AppConfig()
    if path is None:
        return _apply_env(config)
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "embedding" in data:
        config.embedding = EmbeddingProviderConfig(**data["embedding"])
    if data.get("eval_embedding"):
        config.eval_embedding = EmbeddingProviderConfig(**data["eval_embedding"])
    if "synthesis" in data:
        config.synthesis = SynthesisConfig(**data["synthesis"])
    if "expert_modes" in data:
        config.expert_modes = {
            name: ExpertConfig(**cfg) for name, cfg in data["expert_modes"].items()
        }
    if "defaults" in data:
        config.defaults = InquiryDefaults(**data["defaults"])
    for key in (
        "subject_matter",
        "max_concurrent_provider_calls",
        "request_log_path",
        "video_url_template",
        "section_url_template",
    ):
        if key in data:
            setattr(config, key, data[key])
    config.synthesis.subject_matter = config.subject_matter
    return _apply_env(config)


def _apply_env(config: AppConfig) -> AppConfig:
    for suffix, (section, attr) in _ENV_KEYS.items():
        value = os.environ.get(ENV_PREFIX + suffix)
        if value is None:
            continue
        if section == "embedding":
            setattr(config.embedding, attr, value)
        elif section == "synthesis":
            setattr(config.synthesis, attr, value)
        elif section == "expert":
            for expert in config.expert_modes.values():
                setattr(expert, attr, value)
    return config
