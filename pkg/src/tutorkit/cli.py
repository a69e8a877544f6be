"""Command-line entry point wiring every pipeline stage.

Subcommands exchange data through files so the once-only offline stages
(ingest, embed, index) can be rerun independently of the online ones
(ask, serve). Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus, qagen
from .config import AppConfig, load_config
from .embedding import (
    DeterministicEmbeddingProvider,
    Embedder,
    EmbeddingVector,
)
from .errors import TutorkitError
from .evaluation import (
    EvalReport,
    cosine_eval,
    judge_eval,
    read_eval_items,
    render_report,
    write_report,
)
from .inquiry import (
    ExpertConfig,
    ExpertMode,
    InquiryPipeline,
    InquirySettings,
    SynthesisConfig,
)
from .mocks import (
    ScriptedChatProvider,
    mock_answer_handler,
    mock_coding_qa_handler,
    mock_expert_handler,
    mock_judge_handler,
    mock_question_handler,
    mock_synthesis_handler,
)
from .providers import OpenAIChatClient, RetryPolicy
from .vector_index import IndexEntry, build_index, load_index, save_index

MOCK_EMBED_DIM = 64


def _chat_client(endpoint_url: str, timeout: float = 60.0, retries: int = 2):
    return OpenAIChatClient(
        endpoint_url=endpoint_url,
        timeout_seconds=timeout,
        retry=RetryPolicy(max_retries=retries),
    )


class ProviderSet:
    """Concrete providers for one run: real HTTP clients or offline mocks."""

    def __init__(self, config: AppConfig, *, mock: bool = False, mock_reply: str | None = None):
        self.config = config
        if mock:
            self.embedder = Embedder(
                DeterministicEmbeddingProvider(dim=MOCK_EMBED_DIM),
                config.embedding.model_id,
            )
            self.eval_embedder = Embedder(
                DeterministicEmbeddingProvider(dim=MOCK_EMBED_DIM),
                config.effective_eval_embedding.model_id,
            )
            self.expert_providers = {
                mode: ScriptedChatProvider(handler=mock_expert_handler)
                for mode in ExpertMode
                if mode != ExpertMode.BYPASS
            }
            synthesis_replies = [mock_reply] if mock_reply is not None else None
            self.synthesis_provider = ScriptedChatProvider(
                replies=synthesis_replies, handler=mock_synthesis_handler
            )
            self.question_provider = ScriptedChatProvider(handler=mock_question_handler)
            self.answer_provider = ScriptedChatProvider(handler=mock_answer_handler)
            self.coding_qa_provider = ScriptedChatProvider(handler=mock_coding_qa_handler)
            self.judge_provider = ScriptedChatProvider(handler=mock_judge_handler)
        else:
            self.embedder = Embedder.from_config(config.embedding)
            self.eval_embedder = Embedder.from_config(config.effective_eval_embedding)
            self.expert_providers = {
                mode: _chat_client(config.expert_config(mode).endpoint_url)
                for mode in ExpertMode
                if mode != ExpertMode.BYPASS
            }
            self.synthesis_provider = _chat_client(config.synthesis.endpoint_url)
            self.question_provider = self.synthesis_provider
            self.answer_provider = self.synthesis_provider
            self.coding_qa_provider = self.synthesis_provider
            self.judge_provider = self.synthesis_provider


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tutorkit",
        description="Course-assistant pipelines: ingest, index, QA generation, inquiry, evaluation.",
    )
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument(
        "--mock-providers",
        action="store_true",
        help="use in-process deterministic providers (offline)",
    )
    parser.add_argument(
        "--mock-reply-file",
        help="with --mock-providers: file whose content the synthesis mock returns verbatim",
        default=None,
    )
    parser.add_argument(
        "--json", action="store_true", help="machine-readable output/errors as JSON"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="chunk course material into JSONL")
    p.add_argument("--kind", choices=["textbook", "transcript", "coding"], required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, default=corpus.DEFAULT_CHUNK_BUDGET)

    p = sub.add_parser("embed", help="embed chunks into a vectors JSONL")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None, help="embedding cache JSONL")

    p = sub.add_parser("index", help="build an index file from chunks + vectors")
    p.add_argument("--chunks", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("generate-qa", help="generate a QA dataset")
    p.add_argument("--source", choices=["textbook", "transcript", "coding"], required=True)
    p.add_argument("--chunks", required=True, help="chunks JSONL for the source")
    p.add_argument("--index", required=True, help="retrieval index file")
    p.add_argument("--strategy", type=int, choices=[1, 2, 3], default=1,
                   help="coding prompt strategy (coding source only)")
    p.add_argument("--k", type=int, default=10, help="questions per section")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="seeded train/test split of a QA dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--test-fraction", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="tagged dataset JSONL")
    p.add_argument("--train-out", default=None)
    p.add_argument("--test-out", default=None)

    p = sub.add_parser("ask", help="run one inquiry against the index")
    p.add_argument("question")
    p.add_argument("--index", required=True)
    p.add_argument(
        "--expert-mode",
        choices=[m.value for m in ExpertMode],
        default=None,
    )
    p.add_argument("--bypass-expert", action="store_true",
                   help="shorthand for --expert-mode bypass")
    p.add_argument("--k-video", type=int, default=None)
    p.add_argument("--k-textbook", type=int, default=None)
    p.add_argument("--max-tokens-per-content", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--top-p", type=float, default=None)
    p.add_argument("--max-new-tokens", type=int, default=None)
    p.add_argument("--num-beams", type=int, default=None)

    p = sub.add_parser("evaluate", help="score paired responses against labels")
    p.add_argument("--metric", choices=["cosine", "judge1", "judge2"], required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="JSON report path")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--index", required=True)

    p = sub.add_parser("config", help="configuration helpers")
    p.add_argument("action", choices=["show"])

    p = sub.add_parser("schema", help="export shared JSON schemas")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _cmd_ingest(args) -> int:
    budget = args.budget
    if args.kind == "textbook":
        sections = corpus.load_textbook_sections(args.input)
        chunks = corpus.ingest_textbook(sections, budget)
    elif args.kind == "transcript":
        chunks = []
        for video_id, segments in corpus.load_transcript_segments(args.input).items():
            chunks.extend(corpus.ingest_transcript(video_id, segments, budget))
    else:
        assignment_id, files = corpus.load_assignment_dir(args.input)
        chunks = corpus.ingest_assignment(assignment_id, files)
    n = corpus.write_chunks(chunks, args.out)
    _emit(args, {"chunks_written": n, "out": args.out}, f"wrote {n} chunks to {args.out}")
    return 0


def _cmd_embed(args, providers: ProviderSet) -> int:
    chunks = corpus.read_chunks(args.chunks)
    embedder = providers.embedder
    if args.cache:
        embedder = Embedder(
            providers.embedder.provider, providers.config.embedding.model_id, args.cache
        )
    with open(args.out, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            vector = embedder.embed(chunk.text)
            fh.write(
                json.dumps(
                    {
                        "chunk_id": chunk.chunk_id,
                        "model_id": vector.model_id,
                        "dim": vector.dim,
                        "values": list(vector.values),
                    }
                )
                + "\n"
            )
    _emit(args, {"embedded": len(chunks), "out": args.out},
          f"embedded {len(chunks)} chunks to {args.out}")
    return 0


def _cmd_index(args) -> int:
    chunks = {c.chunk_id: c for c in corpus.read_chunks(args.chunks)}
    entries = []
    with open(args.vectors, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            chunk = chunks.get(row["chunk_id"])
            if chunk is None:
                raise TutorkitError(f"vector for unknown chunk_id {row['chunk_id']}")
            entries.append(
                IndexEntry(
                    chunk=chunk,
                    vector=EmbeddingVector.from_values(row["values"], row["model_id"]),
                )
            )
    index = build_index(entries)
    save_index(index, args.out)
    _emit(args, {"indexed": len(index), "out": args.out},
          f"indexed {len(index)} chunks to {args.out}")
    return 0


def _cmd_generate_qa(args, providers: ProviderSet) -> int:
    chunks = corpus.read_chunks(args.chunks)
    index = load_index(args.index)
    if args.source == "coding":
        pairs = qagen.generate_coding_qa(
            chunks,
            args.strategy,
            providers.coding_qa_provider,
            providers.config.synthesis.model_id,
        )
    else:
        origin = (
            qagen.QAOrigin.TEXTBOOK
            if args.source == "textbook"
            else qagen.QAOrigin.TRANSCRIPT
        )
        pairs = qagen.generate_section_qa(
            chunks,
            index,
            providers.embedder,
            _SplitProvider(providers),
            providers.config.synthesis.model_id,
            questions_per_section=args.k,
            origin=origin,
        )
    n = qagen.write_dataset(pairs, args.out)
    _emit(args, {"pairs_written": n, "out": args.out},
          f"wrote {n} QA pairs to {args.out}")
    return 0


class _SplitProvider:
    """Routes question-generation and answer-generation calls to their
    respective providers based on the system prompt in use."""

    def __init__(self, providers: ProviderSet):
        self._providers = providers

    def complete(self, model, messages, **kwargs):
        system = messages[0]["content"] if messages and messages[0]["role"] == "system" else ""
        if system.lstrip().startswith("You are an AI assistant specialized"):
            return self._providers.question_provider.complete(model, messages, **kwargs)
        return self._providers.answer_provider.complete(model, messages, **kwargs)


def _cmd_split(args) -> int:
    pairs = qagen.read_dataset(args.input)
    train, test = qagen.split_dataset(pairs, args.test_fraction, args.seed)
    qagen.write_dataset(train + test, args.out)
    if args.train_out:
        qagen.write_dataset(train, args.train_out)
    if args.test_out:
        qagen.write_dataset(test, args.test_out)
    _emit(
        args,
        {"train": len(train), "test": len(test), "out": args.out},
        f"split {len(pairs)} pairs: {len(train)} train / {len(test)} test -> {args.out}",
    )
    return 0


def _build_pipeline(args, config: AppConfig, providers: ProviderSet) -> InquiryPipeline:
    index = load_index(args.index)
    expert_configs = {
        mode: config.expert_config(mode)
        for mode in ExpertMode
        if mode != ExpertMode.BYPASS
    }
    return InquiryPipeline(
        index=index,
        embedder=providers.embedder,
        expert_configs=expert_configs,
        expert_providers=providers.expert_providers,
        synthesis_config=config.synthesis,
        synthesis_provider=providers.synthesis_provider,
    )


def _cmd_ask(args, config: AppConfig, providers: ProviderSet) -> int:
    pipeline = _build_pipeline(args, config, providers)
    mode = args.expert_mode or config.defaults.expert_mode
    if args.bypass_expert:
        mode = ExpertMode.BYPASS.value
    defaults = config.defaults
    settings = InquirySettings(
        expert_mode=ExpertMode(mode),
        k_video=args.k_video if args.k_video is not None else defaults.k_video,
        k_textbook=(
            args.k_textbook if args.k_textbook is not None else defaults.k_textbook
        ),
        max_tokens_per_content=(
            args.max_tokens_per_content or defaults.max_tokens_per_content
        ),
        temperature=args.temperature,
        top_p=args.top_p,
        max_new_tokens=args.max_new_tokens,
        num_beams=args.num_beams,
    )
    result = pipeline.run(args.question, settings)
    if args.json:
        payload = {
            "expert_mode": settings.expert_mode.value,
            "expert_answer": result.expert_answer,
            "synthesized_answer": result.synthesized_answer,
            "insufficient": result.insufficient,
            "citations": [c.to_dict() for c in result.citations],
            "hits": [
                {"chunk_id": h.chunk_id, "kind": h.kind.value, "score": h.score,
                 "locator": h.locator.to_dict()}
                for h in result.hits_used
            ],
        }
        print(json.dumps(payload, indent=2))
        return 0
    if result.expert_answer is not None:
        print("--- expert answer ---")
        print(result.expert_answer)
        print()
    print("--- synthesized answer ---")
    print(result.synthesized_answer)
    if result.citations:
        print()
        print("--- citations ---")
        for citation in result.citations:
            if citation.kind.value == "video":
                print(f"Video {citation.video_id} @ {citation.time}")
            else:
                title = f" ({citation.section_title})" if citation.section_title else ""
                print(f"Section {citation.section_id}{title}")
    return 0


def _cmd_evaluate(args, providers: ProviderSet) -> int:
    items = read_eval_items(args.input)
    report = EvalReport(n=len(items))
    if args.metric == "cosine":
        result = cosine_eval(items, providers.eval_embedder)
        report.avg_cos_a = result.avg_cos_a
        report.avg_cos_b = result.avg_cos_b
        report.win_a, report.win_b, report.tie = result.win_a, result.win_b, result.tie
    else:
        variant = 1 if args.metric == "judge1" else 2
        tallies = judge_eval(
            items, variant, providers.judge_provider,
            providers.config.synthesis.model_id,
        )
        if variant == 1:
            report.judge1 = tallies
        else:
            report.judge2 = tallies
    write_report(report, args.out)
    table = render_report(report)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(table)
    return 0


def _cmd_serve(args, config: AppConfig, providers: ProviderSet) -> int:
    import uvicorn

    from .service import create_app

    pipeline = _build_pipeline(args, config, providers)
    app = create_app(config, pipeline)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_schema(args) -> int:
    from .service import export_schemas

    written = export_schemas(args.out)
    _emit(args, {"written": [str(p) for p in written]},
          "\n".join(f"wrote {p}" for p in written))
    return 0


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload) if args.json else text)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        mock_reply = None
        if args.mock_reply_file:
            mock_reply = Path(args.mock_reply_file).read_text(encoding="utf-8")
        needs_providers = args.command in (
            "embed", "generate-qa", "ask", "evaluate", "serve",
        )
        providers = (
            ProviderSet(config, mock=args.mock_providers, mock_reply=mock_reply)
            if needs_providers
            else None
        )
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "embed":
            return _cmd_embed(args, providers)
        if args.command == "index":
            return _cmd_index(args)
        if args.command == "generate-qa":
            return _cmd_generate_qa(args, providers)
        if args.command == "split":
            return _cmd_split(args)
        if args.command == "ask":
            return _cmd_ask(args, config, providers)
        if args.command == "evaluate":
            return _cmd_evaluate(args, providers)
        if args.command == "serve":
            return _cmd_serve(args, config, providers)
        if args.command == "config":
            print(json.dumps(config.to_dict(), indent=2))
            return 0
        if args.command == "schema":
            return _cmd_schema(args)
        parser.error(f"unknown command {args.command}")
        return 2
    except TutorkitError as exc:
        _fail(args, exc)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(args, exc)
        return 1


def _fail(args, exc: Exception) -> None:
    if getattr(args, "json", False):
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
    else:
        print(f"error: {exc}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
