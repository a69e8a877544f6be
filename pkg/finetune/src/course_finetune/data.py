"""Dataset preparation: QA-pair JSONL -> chat-templated token sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .config import EXPERT_SYSTEM_PROMPT
from .tokenizer import ChatTokenizer


class EmptyTrainingSet(Exception):
    """No usable training pairs were provided."""


@dataclass
class ChatExample:
    input_ids: list[int]
    label_mask: list[int]  # 1 where the token is assistant content (a target)


@dataclass
class ChatDataset:
    examples: list[ChatExample]
    tokenizer: ChatTokenizer

    def __len__(self) -> int:
        return len(self.examples)

    def batches(self, batch_size: int, order: list[int] | None = None):
        order = order if order is not None else list(range(len(self.examples)))
        pad = self.tokenizer.pad_id
        for start in range(0, len(order), batch_size):
            chosen = [self.examples[i] for i in order[start : start + batch_size]]
            width = max(len(e.input_ids) for e in chosen)
            ids = torch.full((len(chosen), width), pad, dtype=torch.long)
            mask = torch.zeros((len(chosen), width), dtype=torch.long)
            for row, example in enumerate(chosen):
                n = len(example.input_ids)
                ids[row, :n] = torch.tensor(example.input_ids)
                mask[row, :n] = torch.tensor(example.label_mask)
            yield ids, mask


def read_qa_pairs(path: str | Path) -> list[dict]:
    """QA dataset JSONL: {"question","answer","origin","source_refs","split"}."""
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def chat_messages(pair: dict, system_prompt: str = EXPERT_SYSTEM_PROMPT) -> list[dict]:
    return [
        {"role": "system", "content": system_prompt},
        {"role": "user", "content": pair["question"]},
        {"role": "assistant", "content": pair["answer"]},
    ]


def prepare_chat_dataset(
    pairs: list[dict],
    tokenizer: ChatTokenizer,
    max_token_length: int = 700,
    system_prompt: str = EXPERT_SYSTEM_PROMPT,
) -> ChatDataset:
    """Each example is a system+question+answer conversation, truncated to
    the configured token budget. Only Train-tagged pairs are accepted."""
    if not pairs:
        raise EmptyTrainingSet("no pairs provided")
    examples = []
    for pair in pairs:
        split = pair.get("split", "train")
        if split != "train":
            raise ValueError(
                f"only Train-tagged pairs may be used for training, got {split!r}"
            )
        messages = chat_messages(pair, system_prompt)
        ids = tokenizer.apply_chat_template(messages)
        mask = [0] * len(ids)
        for start, end in tokenizer.assistant_spans(messages):
            for i in range(start, min(end, len(ids))):
                mask[i] = 1
        examples.append(
            ChatExample(
                input_ids=ids[:max_token_length], label_mask=mask[:max_token_length]
            )
        )
    if not examples:
        raise EmptyTrainingSet("no usable training examples")
    return ChatDataset(examples=examples, tokenizer=tokenizer)


def build_tokenizer_for_pairs(
    pairs: list[dict], system_prompt: str = EXPERT_SYSTEM_PROMPT, vocab_size: int = 16384
) -> ChatTokenizer:
    texts = [system_prompt]
    for pair in pairs:
        texts.append(pair["question"])
        texts.append(pair["answer"])
    return ChatTokenizer.train(texts, vocab_size=vocab_size)
