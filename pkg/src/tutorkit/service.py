"""HTTP API over the inquiry pipeline.

Request handling is stateless: the index is shared read-only, provider
calls are bounded by a semaphore, and each request gets a UUID echoed back
with per-stage latencies. Question text is only logged when an environment
flag explicitly allows it.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from .config import AppConfig
from .corpus import SourceKind
from .errors import PipelineStageError, ProviderUnavailable, TutorkitError
from .inquiry import (
    Citation,
    CitationKind,
    ExpertMode,
    InquiryPipeline,
    InquiryResult,
    InquirySettings,
)

LOG_QUESTIONS_ENV = "TUTORKIT_LOG_QUESTIONS"

_MODE_VALUES = tuple(mode.value for mode in ExpertMode)


class QueryRequest(BaseModel):
    question: str = Field(min_length=1, max_length=4000)
    expert_mode: Optional[Literal[_MODE_VALUES]] = None
    k_video: Optional[int] = Field(default=None, ge=0, le=10)
    k_textbook: Optional[int] = Field(default=None, ge=0, le=10)
    max_tokens_per_content: Optional[int] = Field(default=None, ge=1, le=100_000)
    temperature: Optional[float] = Field(default=None, ge=0.0, le=2.0)
    top_p: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    max_new_tokens: Optional[int] = Field(default=None, ge=1, le=100_000)
    num_beams: Optional[int] = Field(default=None, ge=1, le=32)

    @model_validator(mode="after")
    def _at_least_one_source(self) -> "QueryRequest":
        if self.k_video is not None and self.k_textbook is not None:
            if self.k_video + self.k_textbook < 1:
                raise ValueError("k_video + k_textbook must be at least 1")
        return self


class CitationOut(BaseModel):
    kind: Literal["video", "section"]
    label: int
    video_id: Optional[str] = None
    start_seconds: Optional[int] = None
    time: Optional[str] = None
    time_seconds: Optional[int] = None
    section_id: Optional[str] = None
    section_title: Optional[str] = None


class HitOut(BaseModel):
    chunk_id: str
    kind: str
    score: float
    locator: dict
    text: str


class QueryResponse(BaseModel):
    request_id: str
    expert_mode: str
    expert_answer: Optional[str] = None
    synthesized_answer: str
    insufficient: bool
    citations: list[CitationOut]
    hits: list[HitOut]
    latencies_ms: dict[str, float]


def _resolve_citation(citation: Citation, result: InquiryResult) -> CitationOut:
    """Attach locator data so clients can build playback/section links.

    The reply cites per-kind context-block numbers; those map back onto the
    hits the synthesis saw, in the order they were presented.
    """
    videos = [h for h in result.hits_used if h.kind == SourceKind.LECTURE_VIDEO]
    sections = [h for h in result.hits_used if h.kind == SourceKind.TEXTBOOK]
    if citation.kind == CitationKind.VIDEO:
        label = int(citation.video_id)
        out = CitationOut(
            kind="video",
            label=label,
            time=citation.time,
            time_seconds=citation.time_seconds,
        )
        if 1 <= label <= len(videos):
            locator = videos[label - 1].locator
            out.video_id = locator.video_id
            out.start_seconds = locator.start_seconds
        return out
    label = int(citation.section_id)
    out = CitationOut(kind="section", label=label, section_title=citation.section_title)
    if 1 <= label <= len(sections):
        out.section_id = sections[label - 1].locator.section_id
    elif citation.section_title:
        out.section_id = citation.section_title
    return out


class RequestLog:
    """Append-only JSONL request log; question text is opt-in via env flag."""

    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()

    def record(self, request_id: str, request: QueryRequest, response: QueryResponse | None, error: str | None = None) -> None:
        if self._path is None:
            return
        entry: dict = {
            "request_id": request_id,
            "timestamp": time.time(),
            "settings": request.model_dump(exclude={"question"}, exclude_none=True),
        }
        if os.environ.get(LOG_QUESTIONS_ENV, "") == "1":
            entry["question"] = request.question
        if response is not None:
            entry["insufficient"] = response.insufficient
            entry["latencies_ms"] = response.latencies_ms
        if error is not None:
            entry["error"] = error
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")


def create_app(config: AppConfig, pipeline: InquiryPipeline) -> FastAPI:
    app = FastAPI(title="course assistant service")
    log = RequestLog(config.request_log_path)
    semaphore = threading.BoundedSemaphore(config.max_concurrent_provider_calls)

    @app.post("/api/query", response_model=QueryResponse)
    def query(request: QueryRequest) -> QueryResponse:
        request_id = str(uuid.uuid4())
        defaults = config.defaults
        settings = InquirySettings(
            expert_mode=ExpertMode(request.expert_mode or defaults.expert_mode),
            k_video=request.k_video if request.k_video is not None else defaults.k_video,
            k_textbook=(
                request.k_textbook
                if request.k_textbook is not None
                else defaults.k_textbook
            ),
            max_tokens_per_content=(
                request.max_tokens_per_content or defaults.max_tokens_per_content
            ),
            temperature=request.temperature,
            top_p=request.top_p,
            max_new_tokens=request.max_new_tokens,
            num_beams=request.num_beams,
        )
        if settings.k_video + settings.k_textbook < 1:
            raise HTTPException(
                status_code=422, detail="k_video + k_textbook must be at least 1"
            )
        try:
            with semaphore:
                result = pipeline.run(request.question, settings)
        except PipelineStageError as exc:
            status = 502 if isinstance(exc.cause, (ProviderUnavailable, OSError)) else 500
            log.record(request_id, request, None, error=str(exc))
            raise HTTPException(
                status_code=status,
                detail={"message": str(exc.cause), "stage": exc.stage.value},
            ) from exc
        except TutorkitError as exc:
            log.record(request_id, request, None, error=str(exc))
            raise HTTPException(status_code=500, detail=str(exc)) from exc

        response = QueryResponse(
            request_id=request_id,
            expert_mode=settings.expert_mode.value,
            expert_answer=result.expert_answer,
            synthesized_answer=result.synthesized_answer,
            insufficient=result.insufficient,
            citations=[_resolve_citation(c, result) for c in result.citations],
            hits=[
                HitOut(
                    chunk_id=h.chunk_id,
                    kind=h.kind.value,
                    score=h.score,
                    locator=h.locator.to_dict(),
                    text=h.text,
                )
                for h in result.hits_used
            ],
            latencies_ms=result.timings_ms,
        )
        log.record(request_id, request, response)
        return response

    @app.get("/api/config")
    def serve_config() -> dict:
        return {
            "expert_modes": list(_MODE_VALUES),
            "models": {
                "embedding": config.embedding.model_id,
                "synthesis": config.synthesis.model_id,
                **{
                    f"expert_{name}": cfg.model_id
                    for name, cfg in config.expert_modes.items()
                },
            },
            "defaults": {
                "expert_mode": config.defaults.expert_mode,
                "k_video": config.defaults.k_video,
                "k_textbook": config.defaults.k_textbook,
                "max_tokens_per_content": config.defaults.max_tokens_per_content,
                "temperature": config.defaults.temperature,
                "top_p": config.defaults.top_p,
                "max_new_tokens": config.defaults.max_new_tokens,
                "num_beams": config.defaults.num_beams,
            },
            "bounds": {
                "k_video": {"min": 0, "max": 10},
                "k_textbook": {"min": 0, "max": 10},
                "temperature": {"min": 0.0, "max": 2.0},
                "top_p": {"min_exclusive": 0.0, "max": 1.0},
                "question_max_chars": 4000,
            },
            "video_url_template": config.video_url_template,
            "section_url_template": config.section_url_template,
            "subject_matter": config.subject_matter,
        }

    @app.get("/api/health")
    def health() -> dict:
        providers = {}
        for name, provider in (
            ("embedding", pipeline.embedder.provider),
            ("synthesis", pipeline.synthesis_provider),
            *(
                (f"expert_{mode.value}", prov)
                for mode, prov in pipeline.expert_providers.items()
            ),
        ):
            probe = getattr(provider, "is_reachable", None)
            providers[name] = bool(probe()) if callable(probe) else True
        return {
            "status": "ok",
            "index_size": len(pipeline.index),
            "providers": providers,
        }

    return app


def export_schemas(out_dir: str | Path) -> list[Path]:
    """Write the JSON schemas shared with web clients."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, model in (
        ("query_request", QueryRequest),
        ("query_response", QueryResponse),
    ):
        path = out / f"{name}.schema.json"
        path.write_text(
            json.dumps(model.model_json_schema(), indent=2) + "\n", encoding="utf-8"
        )
        written.append(path)
    return written
