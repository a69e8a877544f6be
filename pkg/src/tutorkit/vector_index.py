"""Exact top-k cosine retrieval over embedded chunks.

A linear scan is deliberate: course corpora stay small (<= ~10^4 chunks),
exactness keeps the brute-force oracle tests meaningful, and no ANN
structure is worth the complexity. Ties break on ascending chunk id.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ContentChunk, SourceKind, SourceLocator
from .embedding import EmbeddingVector
from .errors import (
    CorruptIndexFile,
    DimensionMismatch,
    EmptyIndex,
    HeterogeneousVectors,
)

# Default retrieval excludes assignment chunks: the inquiry surface offers
# video lectures and textbook sections; QA-generation grounding re-enables
# assignments via search(include_assignments=True).
INQUIRY_KINDS = (SourceKind.LECTURE_VIDEO, SourceKind.TEXTBOOK)


@dataclass(frozen=True)
class IndexEntry:
    chunk: ContentChunk
    vector: EmbeddingVector


@dataclass(frozen=True)
class RetrievalRequest:
    query_vector: EmbeddingVector
    k_video: int = 2
    k_textbook: int = 2
    max_tokens_per_content: int = 700

    def __post_init__(self) -> None:
        if self.k_video < 0 or self.k_textbook < 0:
            raise ValueError("k values must be non-negative")
        if self.k_video + self.k_textbook < 1:
            raise ValueError("at least one of k_video/k_textbook must be positive")
        if self.max_tokens_per_content < 1:
            raise ValueError("max_tokens_per_content must be positive")


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    kind: SourceKind
    locator: SourceLocator
    score: float
    text: str


def truncate_to_budget(text: str, max_tokens: int) -> str:
    """Largest whitespace-aligned prefix whose token estimate fits the budget."""
    max_words = 3 * max_tokens // 4
    words = text.split()
    if len(words) <= max_words:
        return text
    # Cut the original string right after the max_words-th word so the kept
    # prefix preserves its internal whitespace verbatim.
    count = 0
    for i, ch in enumerate(text):
        if ch.isspace():
            continue
        if i == 0 or text[i - 1].isspace():
            count += 1
            if count == max_words + 1:
                return text[:i].rstrip()
    return text


class VectorIndex:
    """Immutable similarity index over homogeneous embedded chunks."""

    def __init__(self, entries: list[IndexEntry]):
        if not entries:
            raise EmptyIndex("cannot build an index from zero entries")
        model_ids = {e.vector.model_id for e in entries}
        dims = {e.vector.dim for e in entries}
        if len(model_ids) > 1 or len(dims) > 1:
            raise HeterogeneousVectors(
                f"entries mix model_ids {sorted(model_ids)} / dims {sorted(dims)}"
            )
        self.model_id = entries[0].vector.model_id
        self.dim = entries[0].vector.dim
        self._entries = list(entries)
        matrix = np.array([e.vector.values for e in entries], dtype=np.float64)
        norms = np.linalg.norm(matrix, axis=1)
        norms[norms == 0.0] = 1.0  # zero vectors score 0 against everything
        self._unit_matrix = matrix / norms[:, None]

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[IndexEntry]:
        return list(self._entries)

    def _scores(self, query_vector: EmbeddingVector) -> np.ndarray:
        if query_vector.dim != self.dim:
            raise DimensionMismatch(
                f"query dim {query_vector.dim} != index dim {self.dim}"
            )
        q = np.asarray(query_vector.values, dtype=np.float64)
        norm = np.linalg.norm(q)
        if norm == 0.0:
            return np.zeros(len(self._entries))
        return np.clip(self._unit_matrix @ (q / norm), -1.0, 1.0)

    def _top_k(self, scores: np.ndarray, candidate_ids: list[int], k: int) -> list[int]:
        ranked = sorted(
            candidate_ids, key=lambda i: (-scores[i], self._entries[i].chunk.chunk_id)
        )
        return ranked[: max(k, 0)]

    def retrieve(self, request: RetrievalRequest) -> list[RetrievalHit]:
        """Per-kind top-k: video hits first, then textbook hits, each group
        sorted by descending score."""
        scores = self._scores(request.query_vector)
        hits: list[RetrievalHit] = []
        for kind, k in (
            (SourceKind.LECTURE_VIDEO, request.k_video),
            (SourceKind.TEXTBOOK, request.k_textbook),
        ):
            ids = [i for i, e in enumerate(self._entries) if e.chunk.kind == kind]
            for i in self._top_k(scores, ids, k):
                hits.append(self._hit(i, scores[i], request.max_tokens_per_content))
        return hits

    def search(
        self,
        query_vector: EmbeddingVector,
        k: int,
        *,
        include_assignments: bool = False,
        max_tokens_per_content: int | None = None,
    ) -> list[RetrievalHit]:
        """Global top-k across kinds (grounding path for QA generation)."""
        scores = self._scores(query_vector)
        allowed = (
            set(SourceKind) if include_assignments else set(INQUIRY_KINDS)
        )
        ids = [i for i, e in enumerate(self._entries) if e.chunk.kind in allowed]
        return [
            self._hit(i, scores[i], max_tokens_per_content)
            for i in self._top_k(scores, ids, k)
        ]

    def _hit(self, i: int, score: float, max_tokens: int | None) -> RetrievalHit:
        chunk = self._entries[i].chunk
        text = chunk.text
        if max_tokens is not None:
            text = truncate_to_budget(text, max_tokens)
        return RetrievalHit(
            chunk_id=chunk.chunk_id,
            kind=chunk.kind,
            locator=chunk.locator,
            score=float(score),
            text=text,
        )


def build_index(entries: list[IndexEntry]) -> VectorIndex:
    return VectorIndex(entries)


def _entry_line(entry: IndexEntry) -> str:
    return json.dumps(
        {"chunk": entry.chunk.to_dict(), "values": list(entry.vector.values)},
        ensure_ascii=False,
        sort_keys=True,
    )


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Header line (model, dim, count, checksum) followed by JSONL entries."""
    if not str(path):
        raise ValueError("index path must be non-empty")
    lines = [_entry_line(e) for e in index.entries]
    checksum = hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
    header = {
        "model_id": index.model_id,
        "dim": index.dim,
        "count": len(index),
        "checksum": checksum,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for line in lines:
            fh.write(line + "\n")


def load_index(path: str | Path) -> VectorIndex:
    if not str(path):
        raise ValueError("index path must be non-empty")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CorruptIndexFile(f"cannot read index file {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines:
        raise CorruptIndexFile(f"index file {path} is empty")
    try:
        header = json.loads(lines[0])
        entry_lines = lines[1:]
        if len(entry_lines) != header["count"]:
            raise CorruptIndexFile(
                f"expected {header['count']} entries, found {len(entry_lines)}"
            )
        checksum = hashlib.sha256("\n".join(entry_lines).encode("utf-8")).hexdigest()
        if checksum != header["checksum"]:
            raise CorruptIndexFile(f"checksum mismatch in {path}")
        entries = []
        for line in entry_lines:
            record = json.loads(line)
            chunk = ContentChunk.from_dict(record["chunk"])
            vector = EmbeddingVector.from_values(record["values"], header["model_id"])
            entries.append(IndexEntry(chunk=chunk, vector=vector))
    except CorruptIndexFile:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptIndexFile(f"malformed index file {path}: {exc}") from exc
    return build_index(entries)
