"""Cosine win rates, judge tallies, and the report table."""

import json
import math

import pytest

from tutorkit import prompts
from tutorkit.embedding import DeterministicEmbeddingProvider, Embedder, EmbeddingVector, cosine_similarity
from tutorkit.errors import UnparseableVerdict
from tutorkit.evaluation import (
    EvalItem,
    EvalReport,
    JudgeTallies,
    cosine_eval,
    judge_eval,
    parse_judge_verdict,
    read_eval_items,
    render_judge_prompt,
    render_report,
    write_report,
)
from tutorkit.mocks import ScriptedChatProvider


def item(i=0, a="base response", b="tuned response"):
    return EvalItem(
        question=f"question {i}",
        label_answer=f"reference answer {i}",
        response_a=a,
        response_b=b,
    )


class ScriptedEmbeddingProvider:
    """Maps exact texts to prescribed vectors (defaults to a fixed vector)."""

    def __init__(self, mapping, dim=2):
        self.mapping = mapping
        self.dim = dim

    def embed_text(self, model, text):
        return self.mapping.get(text, [1.0] + [0.0] * (self.dim - 1))


def sim_vector(target: float) -> list[float]:
    # cos(angle) == target against the fixed label direction (1, 0).
    return [target, math.sqrt(max(0.0, 1.0 - target * target))]


class TestCosineEval:
    def test_identical_response_wins_with_similarity_one(self):
        mapping = {
            "reference answer 0": [1.0, 0.0],
            "reference answer 0 ": [1.0, 0.0],
        }
        embedder = Embedder(ScriptedEmbeddingProvider({}), "m")
        items = [item(0, a="something else entirely", b="reference answer 0")]
        # response_b text == label text => identical cached vector => sim 1.
        provider = DeterministicEmbeddingProvider(dim=16)
        embedder = Embedder(provider, "m")
        result = cosine_eval(items, embedder)
        assert result.win_b == 1 and result.win_a == 0 and result.tie == 0
        assert result.avg_cos_b == pytest.approx(1.0, abs=1e-6)

    def test_counts_match_brute_force_oracle(self):
        provider = DeterministicEmbeddingProvider(dim=16)
        embedder = Embedder(provider, "m")
        items = [item(i, a=f"resp a {i}", b=f"resp b {i}") for i in range(5)]
        result = cosine_eval(items, embedder)

        # Oracle: recompute each similarity directly from the definition.
        wins_a = wins_b = ties = 0
        sims_a = []
        sims_b = []
        for it in items:
            label = EmbeddingVector.from_values(
                provider.embed_text("m", it.label_answer), "m"
            )
            a = EmbeddingVector.from_values(provider.embed_text("m", it.response_a), "m")
            b = EmbeddingVector.from_values(provider.embed_text("m", it.response_b), "m")
            sa, sb = cosine_similarity(label, a), cosine_similarity(label, b)
            sims_a.append(sa)
            sims_b.append(sb)
            if sa > sb:
                wins_a += 1
            elif sb > sa:
                wins_b += 1
            else:
                ties += 1
        assert (result.win_a, result.win_b, result.tie) == (wins_a, wins_b, ties)
        assert result.avg_cos_a == pytest.approx(sum(sims_a) / 5)
        assert result.avg_cos_b == pytest.approx(sum(sims_b) / 5)

    def test_equal_responses_all_tie(self):
        embedder = Embedder(DeterministicEmbeddingProvider(dim=8), "m")
        items = [item(i, a="same text", b="same text") for i in range(4)]
        result = cosine_eval(items, embedder)
        assert result.tie == 4
        assert result.win_a == result.win_b == 0

    def test_embeddings_are_cache_deduplicated(self):
        provider = DeterministicEmbeddingProvider(dim=8)
        embedder = Embedder(provider, "m")
        items = [item(0, a="shared", b="shared") for _ in range(3)]
        cosine_eval(items, embedder)
        # one label + one shared response text
        assert provider.calls == 2

    def test_order_stability(self):
        embedder = Embedder(DeterministicEmbeddingProvider(dim=8), "m")
        items = [item(i, a=f"a{i}", b=f"b{i}") for i in range(6)]
        forward = cosine_eval(items, embedder)
        backward = cosine_eval(list(reversed(items)), embedder)
        assert (forward.win_a, forward.win_b, forward.tie) == (
            backward.win_a,
            backward.win_b,
            backward.tie,
        )
        assert forward.avg_cos_a == pytest.approx(backward.avg_cos_a)

    def test_empty_items_rejected(self):
        with pytest.raises(ValueError):
            cosine_eval([], Embedder(DeterministicEmbeddingProvider(), "m"))


class TestJudgeParsing:
    def test_plain_json(self):
        winner, justification = parse_judge_verdict(
            '{"winner": "model 2", "justification": "closer wording"}'
        )
        assert winner == "model2"
        assert justification == "closer wording"

    def test_case_insensitive_winner(self):
        assert parse_judge_verdict('{"winner": "Model 1"}')[0] == "model1"
        assert parse_judge_verdict('{"winner": "BOTH"}')[0] == "both"
        assert parse_judge_verdict('{"winner": "neither"}')[0] == "neither"

    def test_fenced_json(self):
        reply = 'Here you go:\n```json\n{"winner": "both", "justification": "x"}\n```'
        assert parse_judge_verdict(reply)[0] == "both"

    def test_prose_without_json_rejected(self):
        with pytest.raises(UnparseableVerdict):
            parse_judge_verdict("BOTH models look fine to me")

    def test_unknown_winner_rejected(self):
        with pytest.raises(UnparseableVerdict):
            parse_judge_verdict('{"winner": "model 3"}')


class TestJudgeEval:
    def test_tally_counting(self):
        replies = (
            [json.dumps({"winner": "model 1"})] * 2
            + [json.dumps({"winner": "model 2"})] * 3
            + [json.dumps({"winner": "both"})]
            + [json.dumps({"winner": "neither"})] * 4
        )
        provider = ScriptedChatProvider(replies=replies)
        tallies = judge_eval([item(i) for i in range(10)], 1, provider, "judge")
        assert (tallies.model1, tallies.model2, tallies.both, tallies.neither) == (
            2, 3, 1, 4,
        )
        assert tallies.unparseable == 0
        assert tallies.total == 10

    def test_unparseable_retried_once_then_bucketed(self):
        provider = ScriptedChatProvider(replies=["no json here", "still no json"])
        tallies = judge_eval([item(0)], 1, provider, "judge")
        assert tallies.unparseable == 1
        assert len(provider.calls) == 2
        retry_messages = provider.calls[1]
        assert retry_messages[-1]["content"] == "Output only the JSON."

    def test_retry_success_counts_normally(self):
        provider = ScriptedChatProvider(
            replies=["garbled", json.dumps({"winner": "model 2"})]
        )
        tallies = judge_eval([item(0)], 1, provider, "judge")
        assert tallies.model2 == 1
        assert tallies.unparseable == 0

    def test_prompt_slots_fixed_order(self):
        rendered = render_judge_prompt(item(0, a="BASE_TEXT", b="TUNED_TEXT"), 1)
        assert "Model 1 Response: BASE_TEXT" in rendered
        assert "Model 2 Response: TUNED_TEXT" in rendered

    def test_swap_flag_swaps_slots_and_flips_verdicts(self):
        rendered = render_judge_prompt(item(0, a="BASE_TEXT", b="TUNED_TEXT"), 1, swap_order=True)
        assert "Model 1 Response: TUNED_TEXT" in rendered
        assert "Model 2 Response: BASE_TEXT" in rendered
        # judge says "model 1" (the tuned response in swapped order) -> model2 tally
        provider = ScriptedChatProvider(replies=[json.dumps({"winner": "model 1"})])
        tallies = judge_eval([item(0)], 1, provider, "judge", swap_order=True)
        assert tallies.model2 == 1

    def test_variant_selects_template(self):
        lexical = render_judge_prompt(item(0), 1)
        content = render_judge_prompt(item(0), 2)
        assert "Lexical matching" in lexical
        assert "Content Accuracy" in content


TABLE1_WIN = (65, 400)
TABLE1_JUDGE1 = (39, 202, 13, 211)
TABLE1_JUDGE2 = (125, 201, 42, 97)


class TestReport:
    def make_report(self):
        return EvalReport(
            n=465,
            avg_cos_a=0.818,
            avg_cos_b=0.879,
            win_a=TABLE1_WIN[0],
            win_b=TABLE1_WIN[1],
            tie=0,
            judge1=JudgeTallies(*TABLE1_JUDGE1, 0),
            judge2=JudgeTallies(*TABLE1_JUDGE2, 0),
        )

    def test_winner_percentages(self):
        rendered = render_report(self.make_report())
        assert "86.02%" in rendered
        assert "13.98%" in rendered

    def test_judge_percentages(self):
        rendered = render_report(self.make_report())
        for expected in ("8.39%", "43.44%", "2.80%", "45.38%",
                         "26.88%", "43.23%", "9.03%", "20.86%"):
            assert expected in rendered

    def test_averages_three_decimals(self):
        rendered = render_report(self.make_report())
        assert "0.818" in rendered
        assert "0.879" in rendered

    def test_delta_printed_both_ways(self):
        rendered = render_report(self.make_report())
        assert "+0.061 absolute" in rendered
        assert "+7.46% relative" in rendered

    def test_tally_conservation_enforced(self):
        report = self.make_report()
        report.win_a += 1
        with pytest.raises(ValueError):
            render_report(report)

    def test_judge_tally_conservation_includes_unparseable(self):
        report = self.make_report()
        report.judge1 = JudgeTallies(39, 202, 13, 210, 1)
        render_report(report)  # still sums to 465
        report.judge1 = JudgeTallies(39, 202, 13, 210, 0)
        with pytest.raises(ValueError):
            render_report(report)

    def test_zero_n_rejected(self):
        with pytest.raises(ValueError):
            render_report(EvalReport(n=0))


class TestItemIO:
    def test_read_items(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_text(
            json.dumps(
                {"question": "q", "label": "l", "response_a": "a", "response_b": "b"}
            )
            + "\n"
        )
        items = read_eval_items(path)
        assert items == [
            EvalItem(question="q", label_answer="l", response_a="a", response_b="b")
        ]

    def test_write_report(self, tmp_path):
        report = EvalReport(n=2, judge1=JudgeTallies(1, 1, 0, 0, 0))
        path = tmp_path / "report.json"
        write_report(report, path)
        data = json.loads(path.read_text())
        assert data["n"] == 2
        assert data["judge1"]["model1"] == 1

    def test_empty_fields_rejected(self):
        with pytest.raises(ValueError):
            EvalItem(question="", label_answer="l", response_a="a", response_b="b")
