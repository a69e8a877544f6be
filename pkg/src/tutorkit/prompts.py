"""Prompt templates used across generation, synthesis, and judging.

Templates live as package data and are loaded verbatim; placeholder
substitution touches only the named ``{slot}`` tokens, so LaTeX braces and
escaped sequences inside the templates survive untouched. Rendered output
is pinned byte-for-byte by golden-file tests.
"""

from __future__ import annotations

import re
from importlib import resources

__all__ = [
    "QUESTION_GENERATION",
    "ANSWER_GENERATION_SYSTEM",
    "ANSWER_GENERATION_USER",
    "EXPERT_SYSTEM",
    "CODING_QA_STRATEGY_1",
    "CODING_QA_STRATEGY_2",
    "CODING_QA_STRATEGY_3",
    "SYNTHESIS_SYSTEM",
    "JUDGE_LEXICAL",
    "JUDGE_CONTENT",
    "ANSWER_INSUFFICIENT_SENTINEL",
    "SYNTHESIS_INSUFFICIENT_SENTINEL",
    "render",
]


def _load(name: str) -> str:
    return (
        resources.files(__package__)
        .joinpath("templates", name)
        .read_text(encoding="utf-8")
    )


# Question generation from a section of reference material; slot: {k}.
QUESTION_GENERATION = _load("question_generation.txt")

# Context-grounded answer generation; user slots: {context}, {question}.
ANSWER_GENERATION_SYSTEM = _load("answer_generation_system.txt")
ANSWER_GENERATION_USER = _load("answer_generation_user.txt")

# Persona given to the course-expert model (also the fine-tuning system prompt).
EXPERT_SYSTEM = _load("expert_system.txt")

# Coding-assignment QA strategies.
# 1: exhaustive pairs from the solution files;
#    slots: {assignment_description}, {main_code}, {fem_code}.
# 2: pairs targeting the template-vs-solution delta;
#    slots: {assignment_description}, {templateMain}, {templateFEM},
#    {main_code}, {fem_code}.
# 3: python/fenics variants; slots: {assignmentDescription}, {femCode}.
CODING_QA_STRATEGY_1 = _load("coding_qa_strategy1.txt")
CODING_QA_STRATEGY_2 = _load("coding_qa_strategy2.txt")
CODING_QA_STRATEGY_3 = _load("coding_qa_strategy3.txt")

# Synthesis agent system prompt; slot: {subject_matter} (two occurrences).
SYNTHESIS_SYSTEM = _load("synthesis_system.txt")

# Pairwise judge prompts; slots: {question}, {prof_ans}, {base_model},
# {fine_tuned}. Model 1 is the base response, Model 2 the tuned one.
JUDGE_LEXICAL = _load("judge_lexical.txt")
JUDGE_CONTENT = _load("judge_content.txt")

# Sentinel the answer generator emits when context is insufficient
# (substring match, case-sensitive, surrounding quotes optional).
ANSWER_INSUFFICIENT_SENTINEL = "NOT ENOUGH INFO"

# Sentinel prefix of an insufficient synthesis reply (exact underscore form).
SYNTHESIS_INSUFFICIENT_SENTINEL = "NOT_ENOUGH_INFO"

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def render(template: str, **values: object) -> str:
    """Substitute named ``{slot}`` placeholders, leaving everything else alone.

    Every provided value must correspond to at least one slot in the
    template; unknown slots in the template are preserved verbatim (the
    templates contain LaTeX text with braces that must not be touched).
    """
    used: set[str] = set()

    def _sub(match: re.Match[str]) -> str:
        name = match.group(1)
        if name in values:
            used.add(name)
            return str(values[name])
        return match.group(0)

    rendered = _PLACEHOLDER.sub(_sub, template)
    unused = set(values) - used
    if unused:
        raise KeyError(f"placeholders not present in template: {sorted(unused)}")
    return rendered
