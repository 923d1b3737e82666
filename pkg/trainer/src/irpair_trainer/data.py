"""Trainer-contract dataset loading and batching.

Rows are line-delimited ``{id, prompt, completion}``. Sequences are
``<bos> prompt <sep> completion <eos>`` and the loss mask covers only the
completion side (including ``<eos>``): prompt tokens condition, they are
never scored.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .tokenizer import Vocab


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    id: str
    prompt_ids: tuple[int, ...]
    completion_ids: tuple[int, ...]


def read_contract_file(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"trainer-contract file not found: {path}")
    rows: list[dict] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path.name} line {line_no}: invalid JSON ({exc.msg})") from exc
            for key in ("id", "prompt", "completion"):
                if key not in obj:
                    raise DataError(f"{path.name} line {line_no}: missing field {key!r}")
            rows.append(obj)
    if not rows:
        raise DataError(f"{path} holds no examples")
    return rows


def encode_rows(rows: list[dict], vocab: Vocab, max_positions: int) -> list[Example]:
    examples = []
    for row in rows:
        prompt_ids = vocab.encode(row["prompt"])
        completion_ids = vocab.encode(row["completion"])
        # 3 specials: <bos>, <sep>, <eos>; clip the prompt head if oversized
        budget = max_positions - 3 - len(completion_ids)
        if budget < 1:
            raise DataError(f"example {row['id']!r} completion alone exceeds the context window")
        if len(prompt_ids) > budget:
            prompt_ids = prompt_ids[-budget:]
        examples.append(Example(str(row["id"]), tuple(prompt_ids), tuple(completion_ids)))
    return examples


def collate(examples: list[Example], vocab: Vocab) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Right-padded (ids, labels, loss_mask); labels align with ids[1:]."""
    sequences = []
    boundaries = []
    for ex in examples:
        seq = [vocab.bos_id, *ex.prompt_ids, vocab.sep_id, *ex.completion_ids, vocab.eos_id]
        sequences.append(seq)
        boundaries.append(2 + len(ex.prompt_ids))  # index of the first completion token
    width = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), width), vocab.pad_id, dtype=torch.long)
    for i, seq in enumerate(sequences):
        ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    labels = ids[:, 1:].clone()
    mask = torch.zeros_like(labels, dtype=torch.bool)
    for i, seq in enumerate(sequences):
        start = boundaries[i] - 1  # label positions are shifted left by one
        end = len(seq) - 1
        mask[i, start:end] = True
    return ids[:, :-1], labels, mask


def batches(
    examples: list[Example], vocab: Vocab, batch_size: int, seed: int, shuffle: bool = True
):
    """Yield collated batches; a fresh seeded order per epoch via the caller's seed."""
    order = list(range(len(examples)))
    if shuffle:
        random.Random(seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        yield collate(chunk, vocab)
