"""Golden-file fidelity tests: every rendered template must match its
frozen golden byte-for-byte."""

from pathlib import Path

import pytest

from tutorkit import prompts

GOLDEN = Path(__file__).parent / "golden"

JUDGE_VALUES = {
    "question": "QUESTION",
    "prof_ans": "REFERENCE_ANSWER",
    "base_model": "BASE_RESPONSE",
    "fine_tuned": "TUNED_RESPONSE",
}

CASES = [
    ("question_generation", prompts.QUESTION_GENERATION, {"k": "5"}),
    ("answer_generation_system", prompts.ANSWER_GENERATION_SYSTEM, {}),
    (
        "answer_generation_user",
        prompts.ANSWER_GENERATION_USER,
        {"context": "CONTEXT_BLOCK_1\n\nCONTEXT_BLOCK_2", "question": "What is the weak form?"},
    ),
    ("expert_system", prompts.EXPERT_SYSTEM, {}),
    (
        "coding_strategy_1",
        prompts.CODING_QA_STRATEGY_1,
        {
            "assignment_description": "ASSIGNMENT_DESCRIPTION",
            "main_code": "MAIN_CC_SOLUTION",
            "fem_code": "FEM_H_SOLUTION",
        },
    ),
    (
        "coding_strategy_2",
        prompts.CODING_QA_STRATEGY_2,
        {
            "assignment_description": "ASSIGNMENT_DESCRIPTION",
            "templateMain": "MAIN_CC_TEMPLATE",
            "templateFEM": "FEM_H_TEMPLATE",
            "main_code": "MAIN_CC_SOLUTION",
            "fem_code": "FEM_H_SOLUTION",
        },
    ),
    (
        "coding_strategy_3",
        prompts.CODING_QA_STRATEGY_3,
        {"assignmentDescription": "ASSIGNMENT_DESCRIPTION", "femCode": "FEM_H_SOLUTION"},
    ),
    (
        "synthesis_system",
        prompts.SYNTHESIS_SYSTEM,
        {"subject_matter": "Finite Element Method (FEM)"},
    ),
    ("judge_lexical", prompts.JUDGE_LEXICAL, JUDGE_VALUES),
    ("judge_content", prompts.JUDGE_CONTENT, JUDGE_VALUES),
]


@pytest.mark.parametrize("name,template,values", CASES, ids=[c[0] for c in CASES])
def test_template_matches_golden(name, template, values):
    rendered = prompts.render(template, **values) if values else template
    golden = (GOLDEN / f"{name}.txt").read_bytes().decode("utf-8")
    assert rendered == golden


def test_render_leaves_unknown_braces_untouched():
    # LaTeX-style doubled braces in the templates must survive rendering.
    assert "{{bmatrix}}" in prompts.render(prompts.QUESTION_GENERATION, k=3)


def test_render_rejects_value_with_no_slot():
    with pytest.raises(KeyError):
        prompts.render(prompts.EXPERT_SYSTEM, nonexistent="x")


def test_subject_matter_fills_every_slot():
    rendered = prompts.render(prompts.SYNTHESIS_SYSTEM, subject_matter="Quantum Mechanics")
    assert "{subject_matter}" not in rendered
    assert rendered.count("Quantum Mechanics") == 2


def test_question_prompt_carries_count_and_coverage_band():
    rendered = prompts.render(prompts.QUESTION_GENERATION, k=7)
    assert "up to 7 diverse questions" in rendered
    assert "Coverage 30-100 percentage" in rendered


def test_sentinels():
    assert prompts.ANSWER_INSUFFICIENT_SENTINEL == "NOT ENOUGH INFO"
    assert prompts.SYNTHESIS_INSUFFICIENT_SENTINEL == "NOT_ENOUGH_INFO"
    assert prompts.SYNTHESIS_INSUFFICIENT_SENTINEL in prompts.SYNTHESIS_SYSTEM
    assert prompts.ANSWER_INSUFFICIENT_SENTINEL in prompts.ANSWER_GENERATION_SYSTEM


def test_citation_example_in_synthesis_prompt():
    assert "[**Video 3, time 03:14**]" in prompts.SYNTHESIS_SYSTEM
    assert "[**Video 3, time 03:14; Video 1, time 12:04**]" in prompts.SYNTHESIS_SYSTEM


def test_judge_prompts_define_the_four_outcomes():
    for template in (prompts.JUDGE_LEXICAL, prompts.JUDGE_CONTENT):
        assert '"model 1"' in template
        assert '"model 2"' in template
        assert '"neither"' in template
        assert '"both"' in template
        assert "Output only the JSON." in template
