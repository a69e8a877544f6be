"""Embedding vectors, a caching embedder, and cosine similarity.

The cache is content-addressed: SHA-256 of (model id, text bytes). Hits are
served without touching the provider; entries can persist to an append-only
JSONL file so offline stages survive restarts.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyText, ModelMismatch, ZeroNormVector
from .providers import EmbeddingProvider, OpenAIEmbeddingClient, RetryPolicy


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    model_id: str

    def __post_init__(self) -> None:
        if self.dim != len(self.values):
            raise DimensionMismatch(
                f"declared dim {self.dim} != {len(self.values)} values"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")

    @classmethod
    def from_values(cls, values, model_id: str) -> "EmbeddingVector":
        vals = tuple(float(v) for v in values)
        return cls(values=vals, dim=len(vals), model_id=model_id)


@dataclass
class EmbeddingProviderConfig:
    endpoint_url: str
    model_id: str
    timeout_seconds: float = 30.0
    max_retries: int = 2
    api_key_env: str = "OPENAI_API_KEY"

    def __post_init__(self) -> None:
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be non-empty")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """(a.b)/(|a||b|), clamped into [-1, 1] against floating-point overshoot."""
    if a.model_id != b.model_id:
        raise ModelMismatch(f"cannot compare {a.model_id!r} with {b.model_id!r}")
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    va = np.asarray(a.values, dtype=np.float64)
    vb = np.asarray(b.values, dtype=np.float64)
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroNormVector("cosine similarity undefined for zero-norm vector")
    value = float(np.dot(va, vb)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def cache_key(model_id: str, text: str) -> str:
    digest = hashlib.sha256()
    digest.update(model_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(text.encode("utf-8"))
    return digest.hexdigest()


class Embedder:
    """Caching front-end over an embedding provider.

    For a fixed model id, ``embed`` is a pure function of the text (byte
    equality); repeated calls hit the in-memory cache, and an optional
    JSONL file persists entries across processes. Thread-safe.
    """

    def __init__(
        self,
        provider: EmbeddingProvider,
        model_id: str,
        cache_path: str | Path | None = None,
    ):
        self._provider = provider
        self.model_id = model_id
        self._cache: dict[str, EmbeddingVector] = {}
        self._dims: dict[str, int] = {}
        self._lock = threading.Lock()
        self._cache_path = Path(cache_path) if cache_path else None
        if self._cache_path and self._cache_path.exists():
            self._load_cache_file()

    @property
    def provider(self) -> EmbeddingProvider:
        return self._provider

    @classmethod
    def from_config(
        cls, config: EmbeddingProviderConfig, cache_path: str | Path | None = None
    ) -> "Embedder":
        client = OpenAIEmbeddingClient(
            endpoint_url=config.endpoint_url,
            timeout_seconds=config.timeout_seconds,
            retry=RetryPolicy(max_retries=config.max_retries),
            api_key_env=config.api_key_env,
        )
        return cls(client, config.model_id, cache_path)

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyText("cannot embed empty text")
        key = cache_key(self.model_id, text)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit

        values = self._provider.embed_text(self.model_id, text)
        vector = EmbeddingVector.from_values(values, self.model_id)
        with self._lock:
            known_dim = self._dims.get(self.model_id)
            if known_dim is not None and known_dim != vector.dim:
                raise DimensionMismatch(
                    f"provider returned dim {vector.dim} for model "
                    f"{self.model_id!r}, expected {known_dim}"
                )
            self._dims[self.model_id] = vector.dim
            self._cache[key] = vector
            if self._cache_path:
                self._append_cache_entry(key, vector)
        return vector

    def embed_many(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]

    def _append_cache_entry(self, key: str, vector: EmbeddingVector) -> None:
        record = {
            "key": key,
            "model_id": vector.model_id,
            "dim": vector.dim,
            "values": list(vector.values),
        }
        with open(self._cache_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def _load_cache_file(self) -> None:
        with open(self._cache_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                vector = EmbeddingVector.from_values(
                    record["values"], record["model_id"]
                )
                self._cache[record["key"]] = vector
                self._dims.setdefault(record["model_id"], vector.dim)


class DeterministicEmbeddingProvider:
    """Offline stand-in: hash-seeded pseudo-random unit vectors.

    The vector for a (model, text) pair is stable across runs, so tests and
    mock pipelines behave deterministically without a network.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.calls = 0

    def embed_text(self, model: str, text: str) -> list[float]:
        self.calls += 1
        seed = int.from_bytes(
            hashlib.sha256(f"{model}\x00{text}".encode("utf-8")).digest()[:8], "big"
        )
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        return [float(v) for v in vec]
