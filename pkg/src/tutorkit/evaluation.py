"""Response-alignment evaluation: cosine-similarity win rates and pairwise
LLM-judge protocols, aggregated into a four-row report table.

Slot order is fixed (Model 1 = base response, Model 2 = tuned response); an
opt-in swap flag exists for position-bias studies and flips verdicts back
after judging.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .embedding import Embedder, cosine_similarity
from .errors import UnparseableVerdict
from .providers import ChatProvider


@dataclass(frozen=True)
class EvalItem:
    question: str
    label_answer: str
    response_a: str  # base model
    response_b: str  # tuned / expert model

    def __post_init__(self) -> None:
        for name in ("question", "label_answer", "response_a", "response_b"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must be non-empty")


@dataclass(frozen=True)
class CosineEvalResult:
    avg_cos_a: float
    avg_cos_b: float
    win_a: int
    win_b: int
    tie: int
    n: int


@dataclass(frozen=True)
class JudgeTallies:
    model1: int = 0
    model2: int = 0
    both: int = 0
    neither: int = 0
    unparseable: int = 0

    @property
    def total(self) -> int:
        return self.model1 + self.model2 + self.both + self.neither + self.unparseable


@dataclass
class EvalReport:
    n: int
    avg_cos_a: float | None = None
    avg_cos_b: float | None = None
    win_a: int = 0
    win_b: int = 0
    tie: int = 0
    judge1: JudgeTallies | None = None
    judge2: JudgeTallies | None = None
    model_a_name: str = "base model"
    model_b_name: str = "expert model"

    def validate(self) -> None:
        if self.n <= 0:
            raise ValueError("report requires n > 0")
        if self.avg_cos_a is not None and self.win_a + self.win_b + self.tie != self.n:
            raise ValueError("cosine win/tie tallies must sum to n")
        for tallies in (self.judge1, self.judge2):
            if tallies is not None and tallies.total != self.n:
                raise ValueError("judge tallies (incl. unparseable) must sum to n")

    def to_dict(self) -> dict:
        out: dict = {
            "n": self.n,
            "model_a_name": self.model_a_name,
            "model_b_name": self.model_b_name,
        }
        if self.avg_cos_a is not None:
            out.update(
                avg_cos_a=self.avg_cos_a,
                avg_cos_b=self.avg_cos_b,
                win_a=self.win_a,
                win_b=self.win_b,
                tie=self.tie,
            )
        for name, tallies in (("judge1", self.judge1), ("judge2", self.judge2)):
            if tallies is not None:
                out[name] = {
                    "model1": tallies.model1,
                    "model2": tallies.model2,
                    "both": tallies.both,
                    "neither": tallies.neither,
                    "unparseable": tallies.unparseable,
                }
        return out


def cosine_eval(
    items: Sequence[EvalItem], embedder: Embedder, *, max_workers: int = 1
) -> CosineEvalResult:
    """Per item: embed label and both responses, compare similarities.

    A response wins only on a strictly higher similarity; equal scores tie.
    """
    if not items:
        raise ValueError("cosine_eval requires at least one item")

    def score(item: EvalItem) -> tuple[float, float]:
        label = embedder.embed(item.label_answer)
        sim_a = cosine_similarity(label, embedder.embed(item.response_a))
        sim_b = cosine_similarity(label, embedder.embed(item.response_b))
        return sim_a, sim_b

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scored = list(pool.map(score, items))
    else:
        scored = [score(item) for item in items]

    win_a = sum(1 for a, b in scored if a > b)
    win_b = sum(1 for a, b in scored if b > a)
    tie = len(scored) - win_a - win_b
    return CosineEvalResult(
        avg_cos_a=sum(a for a, _ in scored) / len(scored),
        avg_cos_b=sum(b for _, b in scored) / len(scored),
        win_a=win_a,
        win_b=win_b,
        tie=tie,
        n=len(scored),
    )


_FENCED_JSON = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)
_WINNERS = {"model 1": "model1", "model 2": "model2", "both": "both", "neither": "neither"}


def parse_judge_verdict(reply: str) -> tuple[str, str]:
    """Returns (winner, justification); winner is model1/model2/both/neither."""
    text = reply.strip()
    fenced = _FENCED_JSON.search(text)
    if fenced:
        text = fenced.group(1)
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end == -1 or end < start:
        raise UnparseableVerdict("no JSON object in judge reply")
    try:
        data = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise UnparseableVerdict(f"invalid JSON in judge reply: {exc}") from exc
    if not isinstance(data, dict):
        raise UnparseableVerdict("judge reply JSON is not an object")
    winner_raw = data.get("winner")
    if not isinstance(winner_raw, str):
        raise UnparseableVerdict(f"missing/invalid winner field: {winner_raw!r}")
    winner = _WINNERS.get(winner_raw.strip().lower())
    if winner is None:
        raise UnparseableVerdict(f"unrecognized winner value: {winner_raw!r}")
    justification = data.get("justification")
    return winner, justification if isinstance(justification, str) else ""


_JUDGE_TEMPLATES = {1: "JUDGE_LEXICAL", 2: "JUDGE_CONTENT"}

# Sent once when a judge reply fails to parse, before giving up on the item.
JUDGE_RETRY_REMINDER = "Output only the JSON."


def render_judge_prompt(item: EvalItem, prompt_variant: int, *, swap_order: bool = False) -> str:
    if prompt_variant not in _JUDGE_TEMPLATES:
        raise ValueError(f"prompt_variant must be 1 or 2, got {prompt_variant}")
    template = getattr(prompts, _JUDGE_TEMPLATES[prompt_variant])
    first, second = (
        (item.response_b, item.response_a) if swap_order else (item.response_a, item.response_b)
    )
    return prompts.render(
        template,
        question=item.question,
        prof_ans=item.label_answer,
        base_model=first,
        fine_tuned=second,
    )


def judge_eval(
    items: Sequence[EvalItem],
    prompt_variant: int,
    provider: ChatProvider,
    model_id: str,
    *,
    swap_order: bool = False,
    max_workers: int = 1,
) -> JudgeTallies:
    """Tally judge verdicts over all items; unparseable replies are retried
    once with a JSON reminder, then counted in their own bucket."""
    if not items:
        raise ValueError("judge_eval requires at least one item")

    def judge(item: EvalItem) -> str:
        prompt = render_judge_prompt(item, prompt_variant, swap_order=swap_order)
        messages = [{"role": "user", "content": prompt}]
        reply = provider.complete(model_id, messages)
        try:
            winner, _ = parse_judge_verdict(reply)
        except UnparseableVerdict:
            retry_messages = messages + [
                {"role": "assistant", "content": reply},
                {"role": "user", "content": JUDGE_RETRY_REMINDER},
            ]
            try:
                winner, _ = parse_judge_verdict(
                    provider.complete(model_id, retry_messages)
                )
            except UnparseableVerdict:
                return "unparseable"
        if swap_order and winner in ("model1", "model2"):
            winner = "model2" if winner == "model1" else "model1"
        return winner

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(judge, items))
    else:
        outcomes = [judge(item) for item in items]

    counts = {key: 0 for key in ("model1", "model2", "both", "neither", "unparseable")}
    for outcome in outcomes:
        counts[outcome] += 1
    return JudgeTallies(**counts)


# --- reporting ----------------------------------------------------------------


def _pct(count: int, n: int) -> str:
    return f"{100.0 * count / n:.2f}%"


def render_report(report: EvalReport) -> str:
    """Four-row table: one row per model plus Both/Neither rows for the
    judge columns. Percentages print to two decimals, averages to three."""
    report.validate()
    n = report.n
    has_cos = report.avg_cos_a is not None

    def judge_cell(tallies: JudgeTallies | None, outcome: str) -> str:
        if tallies is None:
            return "-"
        return _pct(getattr(tallies, outcome), n)

    headers = ["Model", "Avg. Cos. Sim.", "Winner Cos. Sim.", "Judge #1", "Judge #2"]
    rows = [
        [
            report.model_a_name,
            f"{report.avg_cos_a:.3f}" if has_cos else "-",
            _pct(report.win_a, n) if has_cos else "-",
            judge_cell(report.judge1, "model1"),
            judge_cell(report.judge2, "model1"),
        ],
        [
            report.model_b_name,
            f"{report.avg_cos_b:.3f}" if has_cos else "-",
            _pct(report.win_b, n) if has_cos else "-",
            judge_cell(report.judge1, "model2"),
            judge_cell(report.judge2, "model2"),
        ],
        [
            "Both models",
            "-",
            "-",
            judge_cell(report.judge1, "both"),
            judge_cell(report.judge2, "both"),
        ],
        [
            "Neither model",
            "-",
            "-",
            judge_cell(report.judge1, "neither"),
            judge_cell(report.judge2, "neither"),
        ],
    ]
    widths = [
        max(len(headers[c]), *(len(row[c]) for row in rows)) for c in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows)

    lines.append(f"n = {n}")
    if has_cos and report.tie:
        lines.append(f"cosine ties: {report.tie}")
    if has_cos and report.avg_cos_a:
        delta = report.avg_cos_b - report.avg_cos_a
        relative = 100.0 * delta / report.avg_cos_a
        # The absolute-vs-relative denominator is ambiguous in common usage,
        # so both readings are printed.
        lines.append(
            f"avg cosine delta: {delta:+.3f} absolute "
            f"({delta * 100:+.2f} points), {relative:+.2f}% relative"
        )
    for name, tallies in (("judge #1", report.judge1), ("judge #2", report.judge2)):
        if tallies is not None and tallies.unparseable:
            lines.append(f"{name} unparseable verdicts: {tallies.unparseable}")
    return "\n".join(lines)


# --- item I/O --------------------------------------------------------------------


def read_eval_items(path: str | Path) -> list[EvalItem]:
    """Input JSONL: {"question","label","response_a","response_b"}."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            items.append(
                EvalItem(
                    question=row["question"],
                    label_answer=row["label"],
                    response_a=row["response_a"],
                    response_b=row["response_b"],
                )
            )
    return items


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
