"""Ingest course material (textbook sections, lecture transcripts, coding
assignments) into typed, budgeted content chunks.

Chunking is a lossless partition: for textbook and transcript sources the
ordered concatenation of chunk texts reproduces the ingested text exactly.
Assignment files are never split because downstream prompts consume whole
files.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import (
    DuplicateSectionId,
    EmptySection,
    MissingDescription,
    NegativeTimestamp,
    UnsortedSegments,
)

DEFAULT_CHUNK_BUDGET = 700

# A single word estimates to ceil(4/3) = 2 tokens, so no budget below 2 is
# satisfiable by any non-empty chunk.
_MIN_BUDGET = 2


class SourceKind(str, Enum):
    TEXTBOOK = "textbook"
    LECTURE_VIDEO = "lecture_video"
    CODING_ASSIGNMENT = "coding_assignment"


class FileRole(str, Enum):
    DESCRIPTION = "description"
    TEMPLATE = "template"
    SOLUTION = "solution"


def approx_token_count(text: str) -> int:
    """Provider-independent token estimate: word count x 4/3, rounded up."""
    words = len(text.split())
    return (4 * words + 2) // 3


@dataclass(frozen=True)
class SourceLocator:
    """Where a chunk came from; populated fields depend on the source kind.

    Textbook: ``section_id``. Lecture video: ``video_id`` + ``start_seconds``.
    Coding assignment: ``assignment_id`` + ``file_role`` (+ ``filename`` to
    tell the main/fem files of one role apart).
    """

    section_id: str | None = None
    video_id: str | None = None
    start_seconds: int | None = None
    assignment_id: str | None = None
    file_role: FileRole | None = None
    filename: str | None = None

    def __post_init__(self) -> None:
        if self.start_seconds is not None and self.start_seconds < 0:
            raise NegativeTimestamp(f"start_seconds must be >= 0, got {self.start_seconds}")
        if self.section_id is not None and not self.section_id.strip():
            raise ValueError("section_id must be non-empty")
        if self.file_role is not None and self.assignment_id is None:
            raise ValueError("file_role is only meaningful for assignment sources")

    def to_dict(self) -> dict:
        out: dict = {}
        if self.section_id is not None:
            out["section_id"] = self.section_id
        if self.video_id is not None:
            out["video_id"] = self.video_id
        if self.start_seconds is not None:
            out["start_seconds"] = self.start_seconds
        if self.assignment_id is not None:
            out["assignment_id"] = self.assignment_id
        if self.file_role is not None:
            out["file_role"] = self.file_role.value
        if self.filename is not None:
            out["filename"] = self.filename
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SourceLocator":
        role = data.get("file_role")
        return cls(
            section_id=data.get("section_id"),
            video_id=data.get("video_id"),
            start_seconds=data.get("start_seconds"),
            assignment_id=data.get("assignment_id"),
            file_role=FileRole(role) if role is not None else None,
            filename=data.get("filename"),
        )


@dataclass(frozen=True)
class ContentChunk:
    """One retrievable unit of course material."""

    chunk_id: str
    kind: SourceKind
    locator: SourceLocator
    text: str
    approx_tokens: int

    @classmethod
    def create(cls, kind: SourceKind, locator: SourceLocator, text: str) -> "ContentChunk":
        if not text.strip():
            raise ValueError("chunk text must be non-empty after trimming")
        return cls(
            chunk_id=_chunk_id(kind, locator, text),
            kind=kind,
            locator=locator,
            text=text,
            approx_tokens=approx_token_count(text),
        )

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "kind": self.kind.value,
            "locator": self.locator.to_dict(),
            "text": self.text,
            "approx_tokens": self.approx_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContentChunk":
        return cls(
            chunk_id=data["chunk_id"],
            kind=SourceKind(data["kind"]),
            locator=SourceLocator.from_dict(data["locator"]),
            text=data["text"],
            approx_tokens=data["approx_tokens"],
        )


def _chunk_id(kind: SourceKind, locator: SourceLocator, text: str) -> str:
    payload = json.dumps(
        [kind.value, locator.to_dict(), text], sort_keys=True, ensure_ascii=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# --- splitting ------------------------------------------------------------
#
# The text is cut into contiguous "units" whose concatenation equals the
# input; separators stay attached to the unit they follow. Units are then
# greedily packed into chunks under the token budget.

_PARAGRAPH_SEP = re.compile(r"\n[ \t]*\n\s*")
_SENTENCE_SEP = re.compile(r"(?<=[.!?])\s+")
_WORD_SEP = re.compile(r"\s+")


def _split_keeping_separators(text: str, sep: re.Pattern[str]) -> list[str]:
    units: list[str] = []
    start = 0
    for m in sep.finditer(text):
        units.append(text[start : m.end()])
        start = m.end()
    if start < len(text):
        units.append(text[start:])
    # A leading separator produces a whitespace-only first unit; merge such
    # units forward (or backward at the very end) so every unit has content.
    merged: list[str] = []
    for unit in units:
        if merged and not merged[-1].strip():
            merged[-1] += unit
        else:
            merged.append(unit)
    if len(merged) > 1 and not merged[-1].strip():
        tail = merged.pop()
        merged[-1] += tail
    return merged


def _atomic_units(text: str, budget: int) -> list[str]:
    """Paragraph units, split further (sentences, then words) while oversized."""
    units: list[str] = []
    for para in _split_keeping_separators(text, _PARAGRAPH_SEP):
        if approx_token_count(para) <= budget:
            units.append(para)
            continue
        for sentence in _split_keeping_separators(para, _SENTENCE_SEP):
            if approx_token_count(sentence) <= budget:
                units.append(sentence)
            else:
                units.extend(_split_keeping_separators(sentence, _WORD_SEP))
    return units


def _pack_units(units: Sequence[str], budget: int) -> list[str]:
    chunks: list[str] = []
    current = ""
    for unit in units:
        candidate = current + unit
        if current and approx_token_count(candidate) > budget:
            chunks.append(current)
            current = unit
        else:
            current = candidate
    if current:
        chunks.append(current)
    return chunks


def split_text(text: str, budget: int = DEFAULT_CHUNK_BUDGET) -> list[str]:
    """Partition ``text`` into budget-sized pieces at paragraph breaks,
    falling back to sentence and finally whitespace boundaries.

    The returned pieces concatenate back to ``text`` exactly.
    """
    if budget < _MIN_BUDGET:
        raise ValueError(f"chunk budget must be >= {_MIN_BUDGET}, got {budget}")
    if not text:
        return []
    return _pack_units(_atomic_units(text, budget), budget)


# --- ingestion ------------------------------------------------------------


def ingest_textbook(
    sections: Iterable[tuple[str, str]], budget: int = DEFAULT_CHUNK_BUDGET
) -> list[ContentChunk]:
    """Chunk textbook sections, one or more chunks per section in document order."""
    chunks: list[ContentChunk] = []
    seen: set[str] = set()
    for section_id, text in sections:
        if section_id in seen:
            raise DuplicateSectionId(f"section id repeated: {section_id!r}")
        seen.add(section_id)
        if not text.strip():
            raise EmptySection(f"section {section_id!r} contains only whitespace")
        locator = SourceLocator(section_id=section_id)
        for piece in split_text(text, budget):
            chunks.append(ContentChunk.create(SourceKind.TEXTBOOK, locator, piece))
    return chunks


def ingest_transcript(
    video_id: str,
    segments: Iterable[tuple[int, str]],
    budget: int = DEFAULT_CHUNK_BUDGET,
) -> list[ContentChunk]:
    """Merge timestamped transcript segments into budgeted chunks.

    Each chunk carries the start time of its first constituent segment.
    Segment texts are joined with single spaces; the concatenation of the
    resulting chunk texts equals that joined transcript.
    """
    segs = [(int(start), text) for start, text in segments]
    prev = None
    for start, _ in segs:
        if start < 0:
            raise NegativeTimestamp(f"segment start {start} is negative")
        if prev is not None and start < prev:
            raise UnsortedSegments(f"segment at {start}s follows one at {prev}s")
        prev = start

    # (start_seconds, unit_text) pairs; the joining space belongs to the
    # preceding segment so units concatenate losslessly.
    units: list[tuple[int, str]] = []
    for i, (start, text) in enumerate(segs):
        unit = text if i == len(segs) - 1 else text + " "
        if approx_token_count(unit) <= budget:
            units.append((start, unit))
        else:
            units.extend((start, piece) for piece in _atomic_units(unit, budget))

    chunks: list[ContentChunk] = []
    current_text = ""
    current_start: int | None = None
    for start, unit in units:
        candidate = current_text + unit
        if current_text and approx_token_count(candidate) > budget:
            chunks.append(_transcript_chunk(video_id, current_start, current_text))
            current_text, current_start = unit, start
        else:
            if current_start is None:
                current_start = start
            current_text = candidate
    if current_text:
        chunks.append(_transcript_chunk(video_id, current_start, current_text))
    return chunks


def _transcript_chunk(video_id: str, start: int | None, text: str) -> ContentChunk:
    locator = SourceLocator(video_id=video_id, start_seconds=start if start is not None else 0)
    return ContentChunk.create(SourceKind.LECTURE_VIDEO, locator, text)


def ingest_assignment(
    assignment_id: str, files: Iterable[tuple[FileRole, str, str]]
) -> list[ContentChunk]:
    """One chunk per assignment file: (role, filename, text) triples.

    Files are never split; the coding-QA prompts need them whole.
    """
    file_list = list(files)
    if not any(role == FileRole.DESCRIPTION for role, _, _ in file_list):
        raise MissingDescription(f"assignment {assignment_id!r} has no description file")
    chunks = []
    for role, filename, text in file_list:
        locator = SourceLocator(
            assignment_id=assignment_id, file_role=role, filename=filename
        )
        chunks.append(ContentChunk.create(SourceKind.CODING_ASSIGNMENT, locator, text))
    return chunks


# --- file I/O ---------------------------------------------------------------


def write_chunks(chunks: Iterable[ContentChunk], path: str | Path) -> int:
    """Persist chunks as JSONL; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_chunks(path: str | Path) -> list[ContentChunk]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ContentChunk.from_dict(json.loads(line)) for line in fh if line.strip()]


def load_textbook_sections(path: str | Path) -> list[tuple[str, str]]:
    """Textbook input: a JSONL of {"section_id","text"}, or a directory of
    ``<section_id>.tex`` files (sorted by section id)."""
    p = Path(path)
    if p.is_dir():
        sections = []
        for tex in sorted(p.glob("*.tex"), key=lambda f: _section_sort_key(f.stem)):
            sections.append((tex.stem, tex.read_text(encoding="utf-8")))
        return sections
    with open(p, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return [(row["section_id"], row["text"]) for row in rows]


def _section_sort_key(section_id: str) -> tuple:
    parts = section_id.split(".")
    return tuple(int(x) if x.isdigit() else x for x in parts)


def load_transcript_segments(path: str | Path) -> dict[str, list[tuple[int, str]]]:
    """Transcript input: JSONL of {"video_id","start_seconds","text"},
    grouped per video in file order."""
    by_video: dict[str, list[tuple[int, str]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            by_video.setdefault(row["video_id"], []).append(
                (row["start_seconds"], row["text"])
            )
    return by_video


def load_assignment_dir(path: str | Path) -> tuple[str, list[tuple[FileRole, str, str]]]:
    """Assignment input: a directory with a ``manifest.json`` naming the
    assignment and tagging each file with its role."""
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    assignment_id = manifest["assignment_id"]
    files = []
    for entry in manifest["files"]:
        role = FileRole(entry["role"])
        filename = entry["filename"]
        text = (root / filename).read_text(encoding="utf-8")
        files.append((role, filename, text))
    return assignment_id, files
