"""Synthetic QA dataset generation from course material.

Questions come from a per-section generation prompt (JSON array replies),
answers from a retrieval-grounded prompt that may refuse with a sentinel,
and coding assignments go through three dedicated prompting strategies
whose replies arrive as ``Q:`` / ``A:`` blocks.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .corpus import ContentChunk, FileRole, SourceKind, SourceLocator
from .errors import MissingRequiredFile, UnparseableModelOutput
from .providers import ChatProvider
from .vector_index import RetrievalHit, VectorIndex

MIN_COVERAGE = 30
MAX_COVERAGE = 100

# Generation defaults: exploratory questions, near-deterministic answers.
QUESTION_TEMPERATURE = 0.7
ANSWER_TEMPERATURE = 0.2

# Total chunks retrieved to ground each generated answer (assignments included).
ANSWER_CONTEXT_K = 4


class QAOrigin(str, Enum):
    TEXTBOOK = "textbook"
    TRANSCRIPT = "transcript"
    CODING_STRATEGY_1 = "coding_strategy_1"
    CODING_STRATEGY_2 = "coding_strategy_2"
    CODING_STRATEGY_3 = "coding_strategy_3"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class GeneratedQuestion:
    question: str
    coverage: int

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if not MIN_COVERAGE <= self.coverage <= MAX_COVERAGE:
            raise ValueError(
                f"coverage {self.coverage} outside [{MIN_COVERAGE}, {MAX_COVERAGE}]"
            )


@dataclass(frozen=True)
class AnswerOutcome:
    """Either a usable answer or an insufficiency refusal, never both."""

    text: str | None
    insufficient: bool

    @classmethod
    def answer(cls, text: str) -> "AnswerOutcome":
        return cls(text=text, insufficient=False)

    @classmethod
    def not_enough_info(cls) -> "AnswerOutcome":
        return cls(text=None, insufficient=True)

    def __post_init__(self) -> None:
        if self.insufficient == (self.text is not None):
            raise ValueError("outcome must be exactly one of answer / not-enough-info")


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    source_refs: tuple[SourceLocator, ...] = ()
    origin: QAOrigin = QAOrigin.TEXTBOOK
    split: Split = Split.UNASSIGNED

    def __post_init__(self) -> None:
        if not self.answer.strip():
            raise ValueError("answer must be non-empty")
        normalized = self.answer.strip()
        if normalized.lower().startswith("answer:"):
            normalized = normalized[len("answer:") :].strip()
        normalized = normalized.strip('"').rstrip(".").strip('"').strip()
        if normalized == prompts.ANSWER_INSUFFICIENT_SENTINEL or self.answer.lstrip().startswith(
            prompts.SYNTHESIS_INSUFFICIENT_SENTINEL
        ):
            raise ValueError("insufficiency sentinel is not a valid answer")

    def with_split(self, split: Split) -> "QAPair":
        return QAPair(self.question, self.answer, self.source_refs, self.origin, split)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "origin": self.origin.value,
            "source_refs": [ref.to_dict() for ref in self.source_refs],
            "split": self.split.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QAPair":
        return cls(
            question=data["question"],
            answer=data["answer"],
            source_refs=tuple(
                SourceLocator.from_dict(ref) for ref in data.get("source_refs", [])
            ),
            origin=QAOrigin(data.get("origin", "textbook")),
            split=Split(data.get("split", "unassigned")),
        )


# --- question generation ----------------------------------------------------

_CODE_FENCE = re.compile(r"^\s*```[a-zA-Z]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)


def _strip_wrapping(reply: str) -> str:
    """Drop markdown code fences and a literal leading "JSON" marker."""
    text = reply.strip()
    fenced = _CODE_FENCE.match(text)
    if fenced:
        text = fenced.group(1).strip()
    if text[:4].upper() == "JSON":
        text = text[4:].lstrip(" :\n\r\t")
    return text


def parse_question_reply(reply: str, k: int | None = None) -> list[GeneratedQuestion]:
    """Parse a model reply into questions; coverage outside [30, 100] is
    rejected item-wise, anything structurally malformed is a typed error."""
    text = _strip_wrapping(reply)
    start, end = text.find("["), text.rfind("]")
    if start == -1 or end == -1 or end < start:
        raise UnparseableModelOutput("no JSON array found in question reply")
    try:
        items = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise UnparseableModelOutput(f"invalid JSON in question reply: {exc}") from exc
    if not isinstance(items, list):
        raise UnparseableModelOutput("question reply JSON is not an array")

    questions: list[GeneratedQuestion] = []
    for item in items:
        if not isinstance(item, dict):
            raise UnparseableModelOutput(f"question item is not an object: {item!r}")
        question = item.get("question")
        coverage = item.get("coverage")
        if not isinstance(question, str) or not question.strip():
            raise UnparseableModelOutput(f"missing question text in item: {item!r}")
        if isinstance(coverage, bool) or not isinstance(coverage, int):
            raise UnparseableModelOutput(f"coverage is not an integer: {item!r}")
        if MIN_COVERAGE <= coverage <= MAX_COVERAGE:
            questions.append(GeneratedQuestion(question=question, coverage=coverage))
    if k is not None:
        questions = questions[:k]
    return questions


def generate_questions(
    section_chunk: ContentChunk,
    k: int,
    provider: ChatProvider,
    model_id: str,
    *,
    temperature: float = QUESTION_TEMPERATURE,
) -> list[GeneratedQuestion]:
    if not section_chunk.text.strip():
        raise ValueError("section chunk text must be non-empty")
    system = prompts.render(prompts.QUESTION_GENERATION, k=k)
    reply = provider.complete(
        model_id,
        [
            {"role": "system", "content": system},
            {"role": "user", "content": section_chunk.text},
        ],
        temperature=temperature,
    )
    return parse_question_reply(reply, k=k)


# --- answer generation --------------------------------------------------------


def assemble_answer_context(hits: Sequence[RetrievalHit]) -> str:
    return "\n\n".join(hit.text for hit in hits)


def generate_answer(
    question: str,
    context_chunks: Sequence[RetrievalHit],
    provider: ChatProvider,
    model_id: str,
    *,
    temperature: float = ANSWER_TEMPERATURE,
) -> AnswerOutcome:
    if not context_chunks:
        raise ValueError("at least one context chunk is required")
    user = prompts.render(
        prompts.ANSWER_GENERATION_USER,
        context=assemble_answer_context(context_chunks),
        question=question,
    )
    reply = provider.complete(
        model_id,
        [
            {"role": "system", "content": prompts.ANSWER_GENERATION_SYSTEM},
            {"role": "user", "content": user},
        ],
        temperature=temperature,
    )
    if prompts.ANSWER_INSUFFICIENT_SENTINEL in reply:
        return AnswerOutcome.not_enough_info()
    return AnswerOutcome.answer(reply)


# --- coding strategies --------------------------------------------------------


def _classify_assignment_files(chunks: Sequence[ContentChunk]) -> dict[str, str]:
    """Map logical slots (description / solution_main / ...) to file texts."""
    slots: dict[str, str] = {}
    for chunk in chunks:
        if chunk.kind != SourceKind.CODING_ASSIGNMENT:
            continue
        role = chunk.locator.file_role
        name = (chunk.locator.filename or "").lower()
        if role == FileRole.DESCRIPTION:
            slots.setdefault("description", chunk.text)
        elif role == FileRole.SOLUTION and name.startswith("main"):
            slots.setdefault("solution_main", chunk.text)
        elif role == FileRole.SOLUTION and name.startswith("fem"):
            slots.setdefault("solution_fem", chunk.text)
        elif role == FileRole.TEMPLATE and name.startswith("main"):
            slots.setdefault("template_main", chunk.text)
        elif role == FileRole.TEMPLATE and name.startswith("fem"):
            slots.setdefault("template_fem", chunk.text)
    return slots

_STRATEGY_REQUIREMENTS = {
    1: ("description", "solution_main", "solution_fem"),
    2: ("description", "template_main", "template_fem", "solution_main", "solution_fem"),
    3: ("description", "solution_fem"),
}

_STRATEGY_ORIGINS = {
    1: QAOrigin.CODING_STRATEGY_1,
    2: QAOrigin.CODING_STRATEGY_2,
    3: QAOrigin.CODING_STRATEGY_3,
}


def render_coding_prompt(chunks: Sequence[ContentChunk], strategy: int) -> str:
    if strategy not in _STRATEGY_REQUIREMENTS:
        raise ValueError(f"strategy must be 1, 2 or 3, got {strategy}")
    slots = _classify_assignment_files(chunks)
    missing = [s for s in _STRATEGY_REQUIREMENTS[strategy] if s not in slots]
    if missing:
        raise MissingRequiredFile(
            f"strategy {strategy} requires files: {', '.join(missing)}"
        )
    if strategy == 1:
        return prompts.render(
            prompts.CODING_QA_STRATEGY_1,
            assignment_description=slots["description"],
            main_code=slots["solution_main"],
            fem_code=slots["solution_fem"],
        )
    if strategy == 2:
        return prompts.render(
            prompts.CODING_QA_STRATEGY_2,
            assignment_description=slots["description"],
            templateMain=slots["template_main"],
            templateFEM=slots["template_fem"],
            main_code=slots["solution_main"],
            fem_code=slots["solution_fem"],
        )
    return prompts.render(
        prompts.CODING_QA_STRATEGY_3,
        assignmentDescription=slots["description"],
        femCode=slots["solution_fem"],
    )


_QA_MARKER = re.compile(r"^\s*(?:\*{0,2}\d+[.)]\*{0,2}\s*)?(Q|A):\s?(.*)$")


def parse_qa_blocks(reply: str) -> list[tuple[str, str]]:
    """Extract (question, answer) pairs from ``Q:``/``A:`` blocks.

    Numbering prefixes are stripped; ``Q:``/``A:`` markers inside fenced
    code blocks are treated as code, so answers keep their fences intact.
    """
    pairs: list[tuple[str, str]] = []
    question_lines: list[str] | None = None
    answer_lines: list[str] | None = None
    in_fence = False

    def flush() -> None:
        nonlocal question_lines, answer_lines
        if question_lines is None:
            return
        if answer_lines is None:
            raise UnparseableModelOutput("Q: block without a following A: block")
        question = "\n".join(question_lines).strip()
        answer = "\n".join(answer_lines).strip()
        if not question or not answer:
            raise UnparseableModelOutput("empty Q: or A: block")
        pairs.append((question, answer))
        question_lines = answer_lines = None

    for line in reply.splitlines():
        if line.lstrip().startswith("```"):
            in_fence = not in_fence
            if answer_lines is not None:
                answer_lines.append(line)
            continue
        marker = None if in_fence else _QA_MARKER.match(line)
        if marker and marker.group(1) == "Q":
            flush()
            question_lines = [marker.group(2)]
            answer_lines = None
        elif (
            marker
            and marker.group(1) == "A"
            and question_lines is not None
            and answer_lines is None
        ):
            answer_lines = [marker.group(2)]
        elif answer_lines is not None:
            answer_lines.append(line)
        elif question_lines is not None:
            question_lines.append(line)
    flush()

    if not pairs:
        raise UnparseableModelOutput("no Q:/A: blocks found in reply")
    return pairs


def generate_coding_qa(
    chunks: Sequence[ContentChunk],
    strategy: int,
    provider: ChatProvider,
    model_id: str,
    *,
    temperature: float = QUESTION_TEMPERATURE,
) -> list[QAPair]:
    prompt = render_coding_prompt(chunks, strategy)
    reply = provider.complete(
        model_id, [{"role": "user", "content": prompt}], temperature=temperature
    )
    refs = tuple(
        c.locator for c in chunks if c.kind == SourceKind.CODING_ASSIGNMENT
    )
    return [
        QAPair(
            question=q,
            answer=a,
            source_refs=refs,
            origin=_STRATEGY_ORIGINS[strategy],
        )
        for q, a in parse_qa_blocks(reply)
    ]


# --- split ---------------------------------------------------------------------


def split_dataset(
    pairs: Sequence[QAPair], test_fraction: float, seed: int
) -> tuple[list[QAPair], list[QAPair]]:
    """Deterministic seeded partition; |test| = round(fraction * n)
    (round-half-to-even). Input order is preserved within each side."""
    if not pairs:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(pairs)
    n_test = round(test_fraction * n)
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    test_ids = set(indices[:n_test])
    train = [p.with_split(Split.TRAIN) for i, p in enumerate(pairs) if i not in test_ids]
    test = [p.with_split(Split.TEST) for i, p in enumerate(pairs) if i in test_ids]
    return train, test


# --- end-to-end generation -------------------------------------------------------


def generate_section_qa(
    section_chunks: Sequence[ContentChunk],
    index: VectorIndex,
    embedder,
    provider: ChatProvider,
    model_id: str,
    *,
    questions_per_section: int = 10,
    origin: QAOrigin = QAOrigin.TEXTBOOK,
) -> list[QAPair]:
    """Questions per section, grounded answers via retrieval; refusals are
    dropped so no insufficiency sentinel ever reaches the dataset."""
    dataset: list[QAPair] = []
    for chunk in section_chunks:
        questions = generate_questions(
            chunk, questions_per_section, provider, model_id
        )
        for generated in questions:
            query_vec = embedder.embed(generated.question)
            hits = index.search(
                query_vec, ANSWER_CONTEXT_K, include_assignments=True
            )
            if not hits:
                continue
            outcome = generate_answer(generated.question, hits, provider, model_id)
            if outcome.insufficient:
                continue
            dataset.append(
                QAPair(
                    question=generated.question,
                    answer=outcome.text,
                    source_refs=tuple(h.locator for h in hits),
                    origin=origin,
                )
            )
    return dataset


# --- dataset I/O -------------------------------------------------------------------


def write_dataset(pairs: Iterable[QAPair], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_dataset(path: str | Path) -> list[QAPair]:
    with open(path, "r", encoding="utf-8") as fh:
        return [QAPair.from_dict(json.loads(line)) for line in fh if line.strip()]
