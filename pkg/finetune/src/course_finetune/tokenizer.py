"""Word-level tokenizer with a chat template, built from the training corpus.

Stands in for a pretrained tokenizer at desk scale: whitespace tokens, a
fixed special-token set, and an ``apply_chat_template`` that lays out
system/user/assistant turns with role markers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
ROLE_TOKENS = {"system": "<|system|>", "user": "<|user|>", "assistant": "<|assistant|>"}
END_TURN = "<|end|>"
SPECIALS = [PAD, UNK, BOS, EOS, *ROLE_TOKENS.values(), END_TURN]


@dataclass
class ChatTokenizer:
    vocab: dict[str, int]

    @classmethod
    def train(cls, texts: list[str], vocab_size: int = 16384) -> "ChatTokenizer":
        counts: dict[str, int] = {}
        for text in texts:
            for word in text.split():
                counts[word] = counts.get(word, 0) + 1
        vocab = {tok: i for i, tok in enumerate(SPECIALS)}
        budget = vocab_size - len(vocab)
        ranked = sorted(counts, key=lambda w: (-counts[w], w))[:budget]
        for word in ranked:
            vocab[word] = len(vocab)
        return cls(vocab=vocab)

    @property
    def pad_id(self) -> int:
        return self.vocab[PAD]

    def encode(self, text: str) -> list[int]:
        unk = self.vocab[UNK]
        return [self.vocab.get(word, unk) for word in text.split()]

    def apply_chat_template(self, messages: list[dict[str, str]]) -> list[int]:
        """<bos> then per turn: <|role|> tokens <|end|>, closed with <eos>."""
        ids = [self.vocab[BOS]]
        for message in messages:
            ids.append(self.vocab[ROLE_TOKENS[message["role"]]])
            ids.extend(self.encode(message["content"]))
            ids.append(self.vocab[END_TURN])
        ids.append(self.vocab[EOS])
        return ids

    def assistant_spans(self, messages: list[dict[str, str]]) -> list[tuple[int, int]]:
        """Token index ranges (start, end) covering assistant content,
        matching apply_chat_template's layout; used for loss masking."""
        spans = []
        cursor = 1  # skip <bos>
        for message in messages:
            cursor += 1  # role marker
            length = len(message["content"].split())
            if message["role"] == "assistant":
                spans.append((cursor, cursor + length + 1))  # include <|end|>
            cursor += length + 1
        return spans

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.vocab), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ChatTokenizer":
        return cls(vocab=json.loads(Path(path).read_text(encoding="utf-8")))

    def __len__(self) -> int:
        return len(self.vocab)
