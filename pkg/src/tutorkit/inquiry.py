"""Inquiry pipeline: course-expert answer, retrieval, and cited synthesis.

The expert call and the retrieval both depend only on the query, so they
run concurrently; synthesis starts strictly after both finish. A reply that
opens with the insufficiency sentinel sets ``insufficient`` and suppresses
citation extraction.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from time import perf_counter
from typing import Sequence

from . import prompts
from .corpus import SourceKind
from .embedding import Embedder
from .errors import EmptyCompletion, PipelineStage, PipelineStageError
from .providers import ChatProvider
from .vector_index import RetrievalHit, RetrievalRequest, VectorIndex


class ExpertMode(str, Enum):
    TUNED = "tuned"
    PROMPTED_OPEN = "prompted_open"
    PROMPTED_COMMERCIAL = "prompted_commercial"
    BYPASS = "bypass"


@dataclass
class ExpertConfig:
    endpoint_url: str
    model_id: str
    system_prompt: str = prompts.EXPERT_SYSTEM
    max_new_tokens: int = 1024
    num_beams: int = 1

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1 or self.num_beams < 1:
            raise ValueError("max_new_tokens and num_beams must be positive")


@dataclass
class SynthesisConfig:
    endpoint_url: str
    model_id: str
    subject_matter: str = "Finite Element Method (FEM)"
    temperature: float = 0.2
    top_p: float = 1.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")

    def system_prompt(self) -> str:
        return prompts.render(
            prompts.SYNTHESIS_SYSTEM, subject_matter=self.subject_matter
        )


class CitationKind(str, Enum):
    VIDEO = "video"
    SECTION = "section"


_TIME_FORMAT = re.compile(r"^\d{1,4}:[0-5]\d$")


@dataclass(frozen=True)
class Citation:
    """A reference extracted from a bracketed span of the synthesized reply.

    ``video_id`` / ``section_id`` hold the cited context-block number (the
    reply cites "Video 2" meaning the second video block it was shown).
    """

    kind: CitationKind
    video_id: str | None = None
    section_id: str | None = None
    time: str | None = None
    section_title: str | None = None

    def __post_init__(self) -> None:
        if self.time is not None and not _TIME_FORMAT.match(self.time):
            raise ValueError(f"citation time must be MM:SS, got {self.time!r}")

    @property
    def time_seconds(self) -> int | None:
        if self.time is None:
            return None
        minutes, seconds = self.time.split(":")
        return int(minutes) * 60 + int(seconds)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.video_id is not None:
            out["video_id"] = self.video_id
        if self.section_id is not None:
            out["section_id"] = self.section_id
        if self.time is not None:
            out["time"] = self.time
            out["time_seconds"] = self.time_seconds
        if self.section_title is not None:
            out["section_title"] = self.section_title
        return out


_BRACKET_SPAN = re.compile(r"\[([^\[\]]+)\]")
_VIDEO_REF = re.compile(r"^Video\s+(\d+)\s*,\s*time\s+(\d{1,4}:[0-5]\d)$")
_SECTION_REF = re.compile(r"^Section\s+(\d+)\s*(?:\((.+)\))?$")


def _parse_reference(part: str) -> Citation | None:
    text = part.strip().strip("*").strip()
    video = _VIDEO_REF.match(text)
    if video:
        return Citation(
            kind=CitationKind.VIDEO, video_id=video.group(1), time=video.group(2)
        )
    section = _SECTION_REF.match(text)
    if section:
        title = section.group(2)
        return Citation(
            kind=CitationKind.SECTION,
            section_id=section.group(1),
            section_title=title.strip() if title else None,
        )
    return None


def extract_citations(reply: str) -> list[Citation]:
    """Pull citations out of bracketed spans; semicolon-separated multi-refs
    split into individual citations. Non-citation brackets are ignored."""
    citations: list[Citation] = []
    for span in _BRACKET_SPAN.finditer(reply):
        parts = span.group(1).split(";")
        parsed = [_parse_reference(part) for part in parts]
        if all(p is not None for p in parsed):
            citations.extend(parsed)
    return citations


def format_timestamp(total_seconds: int) -> str:
    minutes, seconds = divmod(max(total_seconds, 0), 60)
    return f"{minutes:02d}:{seconds:02d}"


@dataclass(frozen=True)
class InquiryResult:
    expert_answer: str | None
    synthesized_answer: str
    citations: tuple[Citation, ...]
    insufficient: bool
    hits_used: tuple[RetrievalHit, ...]
    timings_ms: dict = field(default_factory=dict, compare=False)


def ask_expert(query: str, config: ExpertConfig, provider: ChatProvider) -> str:
    """Single-turn expert completion under the course-professor persona."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    reply = provider.complete(
        config.model_id,
        [
            {"role": "system", "content": config.system_prompt},
            {"role": "user", "content": query},
        ],
        max_tokens=config.max_new_tokens,
    )
    if not reply or not reply.strip():
        raise EmptyCompletion("expert model returned an empty completion")
    return reply


EXPERT_ANSWER_HEADER = "Expert model answer:"


def build_synthesis_user_message(
    query: str, expert_answer: str | None, hits: Sequence[RetrievalHit]
) -> str:
    """Numbered per-kind context blocks, optional expert answer, then the query.

    Video blocks expose the number and timestamp the reply is instructed to
    cite; section blocks carry the section id so replies can name it.
    """
    blocks: list[str] = []
    video_n = 0
    section_n = 0
    for hit in hits:
        if hit.kind == SourceKind.LECTURE_VIDEO:
            video_n += 1
            stamp = format_timestamp(hit.locator.start_seconds or 0)
            blocks.append(f"Video {video_n}, time {stamp}:\n{hit.text}")
        elif hit.kind == SourceKind.TEXTBOOK:
            section_n += 1
            blocks.append(f"Section {section_n} ({hit.locator.section_id}):\n{hit.text}")

    parts = ["Context:"]
    if blocks:
        parts.append("\n\n".join(blocks))
    if expert_answer is not None:
        parts.append(f"{EXPERT_ANSWER_HEADER}\n{expert_answer}")
    parts.append(f"Question:\n{query}")
    return "\n\n".join(parts)


def synthesize(
    query: str,
    expert_answer: str | None,
    hits: Sequence[RetrievalHit],
    config: SynthesisConfig,
    provider: ChatProvider,
) -> InquiryResult:
    user = build_synthesis_user_message(query, expert_answer, hits)
    reply = provider.complete(
        config.model_id,
        [
            {"role": "system", "content": config.system_prompt()},
            {"role": "user", "content": user},
        ],
        temperature=config.temperature,
        top_p=config.top_p,
    )
    insufficient = reply.lstrip().startswith(prompts.SYNTHESIS_INSUFFICIENT_SENTINEL)
    citations = () if insufficient else tuple(extract_citations(reply))
    return InquiryResult(
        expert_answer=expert_answer,
        synthesized_answer=reply,
        citations=citations,
        insufficient=insufficient,
        hits_used=tuple(hits),
    )


@dataclass
class InquirySettings:
    expert_mode: ExpertMode = ExpertMode.TUNED
    k_video: int = 2
    k_textbook: int = 2
    max_tokens_per_content: int = 700
    temperature: float | None = None
    top_p: float | None = None
    max_new_tokens: int | None = None
    num_beams: int | None = None


class InquiryPipeline:
    """Wires the index, embedder, and providers into a reusable pipeline.

    ``expert_configs``/``expert_providers`` map each non-bypass mode to its
    endpoint; the index is shared read-only, so concurrent runs are safe.
    """

    def __init__(
        self,
        index: VectorIndex,
        embedder: Embedder,
        expert_configs: dict[ExpertMode, ExpertConfig],
        expert_providers: dict[ExpertMode, ChatProvider],
        synthesis_config: SynthesisConfig,
        synthesis_provider: ChatProvider,
    ):
        self.index = index
        self.embedder = embedder
        self.expert_configs = expert_configs
        self.expert_providers = expert_providers
        self.synthesis_config = synthesis_config
        self.synthesis_provider = synthesis_provider

    def _call_expert(self, query: str, settings: InquirySettings) -> str:
        config = self.expert_configs[settings.expert_mode]
        if settings.max_new_tokens is not None or settings.num_beams is not None:
            config = ExpertConfig(
                endpoint_url=config.endpoint_url,
                model_id=config.model_id,
                system_prompt=config.system_prompt,
                max_new_tokens=settings.max_new_tokens or config.max_new_tokens,
                num_beams=settings.num_beams or config.num_beams,
            )
        provider = self.expert_providers[settings.expert_mode]
        if settings.expert_mode == ExpertMode.TUNED:
            # Beam search is an extension field; OpenAI-style providers
            # without it are expected to ignore unknown keys.
            return _expert_with_beams(query, config, provider)
        return ask_expert(query, config, provider)

    def _retrieve(self, query: str, settings: InquirySettings) -> list[RetrievalHit]:
        query_vector = self.embedder.embed(query)
        request = RetrievalRequest(
            query_vector=query_vector,
            k_video=settings.k_video,
            k_textbook=settings.k_textbook,
            max_tokens_per_content=settings.max_tokens_per_content,
        )
        return self.index.retrieve(request)

    def run(self, query: str, settings: InquirySettings | None = None) -> InquiryResult:
        settings = settings or InquirySettings()
        if not query.strip():
            raise ValueError("query must be non-empty")
        timings: dict[str, float] = {}
        started = perf_counter()

        expert_answer: str | None = None
        use_expert = settings.expert_mode != ExpertMode.BYPASS
        with ThreadPoolExecutor(max_workers=2) as pool:
            retrieval_future = pool.submit(
                self._timed, timings, "retrieval", self._retrieve, query, settings
            )
            expert_future = (
                pool.submit(
                    self._timed, timings, "expert", self._call_expert, query, settings
                )
                if use_expert
                else None
            )
            if expert_future is not None:
                try:
                    expert_answer = expert_future.result()
                except Exception as exc:
                    retrieval_future.cancel()
                    raise PipelineStageError(PipelineStage.EXPERT, exc) from exc
            try:
                hits = retrieval_future.result()
            except Exception as exc:
                raise PipelineStageError(PipelineStage.RETRIEVAL, exc) from exc

        synthesis_config = self._synthesis_config_for(settings)
        try:
            synthesis_start = perf_counter()
            result = synthesize(
                query, expert_answer, hits, synthesis_config, self.synthesis_provider
            )
            timings["synthesis"] = (perf_counter() - synthesis_start) * 1000.0
        except Exception as exc:
            raise PipelineStageError(PipelineStage.SYNTHESIS, exc) from exc

        timings["total"] = (perf_counter() - started) * 1000.0
        result.timings_ms.update(timings)
        return result

    def _synthesis_config_for(self, settings: InquirySettings) -> SynthesisConfig:
        config = self.synthesis_config
        if settings.temperature is None and settings.top_p is None:
            return config
        return SynthesisConfig(
            endpoint_url=config.endpoint_url,
            model_id=config.model_id,
            subject_matter=config.subject_matter,
            temperature=(
                settings.temperature
                if settings.temperature is not None
                else config.temperature
            ),
            top_p=settings.top_p if settings.top_p is not None else config.top_p,
        )

    @staticmethod
    def _timed(timings: dict, label: str, fn, *args):
        start = perf_counter()
        result = fn(*args)
        timings[label] = (perf_counter() - start) * 1000.0
        return result


def _expert_with_beams(query: str, config: ExpertConfig, provider: ChatProvider) -> str:
    if not query.strip():
        raise ValueError("query must be non-empty")
    reply = provider.complete(
        config.model_id,
        [
            {"role": "system", "content": config.system_prompt},
            {"role": "user", "content": query},
        ],
        max_tokens=config.max_new_tokens,
        extra={"num_beams": config.num_beams},
    )
    if not reply or not reply.strip():
        raise EmptyCompletion("expert model returned an empty completion")
    return reply
