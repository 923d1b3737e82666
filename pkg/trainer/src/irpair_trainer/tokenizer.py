"""Word-level tokenizer built from the training corpus.

The pattern keeps newlines, ``===`` marker runs, word/number tokens, and
single punctuation marks as separate tokens; detokenization re-attaches
closing punctuation so round-trips preserve the surfaces the pipeline keys
on (begin-marker lines, ``Name:`` turn prefixes).
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

_TOKEN_RE = re.compile(r"\n|={2,}|[A-Za-z0-9']+|[^\sA-Za-z0-9']")
_ATTACH_LEFT = set(".,!?;:)]}%")
_ATTACH_RIGHT = set("([{")

PAD, BOS, SEP, EOS, UNK = "<pad>", "<bos>", "<sep>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, SEP, EOS, UNK)


def split_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text))


def join_tokens(tokens: list[str]) -> str:
    parts: list[str] = []
    glue_next = False
    for token in tokens:
        if token == "\n":
            while parts and parts[-1] == " ":
                parts.pop()
            parts.append("\n")
            glue_next = True
            continue
        if token in _ATTACH_LEFT:
            while parts and parts[-1] == " ":
                parts.pop()
            parts.append(token)
            glue_next = False
            continue
        if not glue_next and parts:
            parts.append(" ")
        parts.append(token)
        glue_next = token in _ATTACH_RIGHT
    return "".join(parts)


@dataclass
class Vocab:
    tokens: list[str]

    def __post_init__(self) -> None:
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def bos_id(self) -> int:
        return self.index[BOS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    def encode(self, text: str) -> list[int]:
        unk = self.index[UNK]
        return [self.index.get(tok, unk) for tok in split_tokens(text)]

    def decode(self, ids: list[int]) -> str:
        specials = set(SPECIALS)
        tokens = [self.tokens[i] for i in ids if self.tokens[i] not in specials]
        return join_tokens(tokens)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.tokens, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def build(cls, texts: list[str], min_count: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for token in split_tokens(text):
                counts[token] = counts.get(token, 0) + 1
        kept = sorted(tok for tok, n in counts.items() if n >= min_count)
        return cls(list(SPECIALS) + kept)
