"""Corpus ingestion, the unpaired split protocol, and shot sampling.

Input files are line-delimited JSON records with fields
``{id, task, role, text, answer_span?, pair_id?}``, UTF-8 encoded. Text is
NFC-normalized at load. The unpaired guarantee is enforced on the original
pair id (``pair_id``), never on text equality, because real corpora contain
duplicate texts.

Seeded operations use Python's ``random.Random`` (Mersenne Twister), so any
(input, seed) combination reproduces byte-identical results across runs and
platforms.
"""

from __future__ import annotations

import json
import random
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

TASKS = ("dialogue_summ", "doc_summ", "question_gen")
ROLES = ("source", "target")

# A dialogue turn is a line beginning "<Name>:"; words are whitespace tokens.
# These two rules back every length hint and statistic in the pipeline.
TURN_RE = re.compile(r"^\s*[^:\n]{1,32}:")


def count_turns(text: str) -> int:
    return sum(1 for line in text.split("\n") if TURN_RE.match(line))


def count_words(text: str) -> int:
    return len(text.split())


class CorpusError(ValueError):
    """A corpus file or corpus operation violated the documented schema."""


@dataclass(frozen=True)
class CorpusRecord:
    """One raw source or target text with a stable id and task tag."""

    id: str
    task: str
    role: str
    text: str
    answer_span: str | None = None
    pair_id: str | None = None

    @property
    def origin_pair_id(self) -> str:
        """Id of the original (source, target) example this record came from."""
        return self.pair_id if self.pair_id is not None else self.id

    def to_json(self) -> dict:
        obj = {"id": self.id, "task": self.task, "role": self.role, "text": self.text}
        if self.answer_span is not None:
            obj["answer_span"] = self.answer_span
        if self.pair_id is not None:
            obj["pair_id"] = self.pair_id
        return obj


@dataclass(frozen=True)
class UnpairedSplit:
    """Disjoint source-only / target-only subsets of a paired corpus."""

    source_set: tuple[CorpusRecord, ...]
    target_set: tuple[CorpusRecord, ...]
    seed: int
    source_fraction: float


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def _validate_record(rec: CorpusRecord, where: str) -> None:
    if rec.task not in TASKS:
        raise CorpusError(f"{where}: unknown task {rec.task!r} (expected one of {TASKS})")
    if rec.role not in ROLES:
        raise CorpusError(f"{where}: unknown role {rec.role!r} (expected one of {ROLES})")
    if not rec.text.strip():
        raise CorpusError(f"{where}: empty text")
    if (
        rec.task == "question_gen"
        and rec.role == "source"
        and rec.answer_span is not None
        and rec.answer_span not in rec.text
    ):
        raise CorpusError(
            f"{where}: answer span not found verbatim in text for id {rec.id!r}"
        )


def load_records(path: str | Path, task: str, role: str) -> list[CorpusRecord]:
    """Load one corpus file, validating each line against the schema.

    Records missing an ``id`` get ``<filename>#<line>``. Records missing
    ``task``/``role`` inherit the requested ones; a conflicting value is an
    error. File order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    records: list[CorpusRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name} line {line_no}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{where}: expected an object, got {type(obj).__name__}")
            text = obj.get("text")
            if not isinstance(text, str) or not text.strip():
                raise CorpusError(f"line {line_no}: empty text")
            for fld, expected in (("task", task), ("role", role)):
                got = obj.get(fld)
                if got is not None and got != expected:
                    raise CorpusError(f"{where}: field {fld}={got!r}, expected {expected!r}")
            span = obj.get("answer_span")
            if span is not None and not isinstance(span, str):
                raise CorpusError(f"{where}: field answer_span must be a string")
            rec = CorpusRecord(
                id=str(obj.get("id") or f"{path.name}#{line_no}"),
                task=task,
                role=role,
                text=_nfc(text),
                answer_span=_nfc(span) if span else None,
                pair_id=str(obj["pair_id"]) if obj.get("pair_id") is not None else None,
            )
            _validate_record(rec, where)
            if rec.id in seen:
                raise CorpusError(
                    f"{path.name}: duplicate id {rec.id!r} on lines {seen[rec.id]} and {line_no}"
                )
            seen[rec.id] = line_no
            records.append(rec)
    return records


def load_pairs(path: str | Path, task: str) -> list[tuple[CorpusRecord, CorpusRecord]]:
    """Load a paired corpus: source and target rows sharing a ``pair_id``.

    Every pair_id must appear exactly once per role. Pairs are returned in
    first-appearance order.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    by_pair: dict[str, dict[str, CorpusRecord]] = {}
    order: list[str] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name} line {line_no}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from exc
            role = obj.get("role")
            if role not in ROLES:
                raise CorpusError(f"{where}: missing or unknown role {role!r}")
            text = obj.get("text")
            if not isinstance(text, str) or not text.strip():
                raise CorpusError(f"line {line_no}: empty text")
            pair_id = obj.get("pair_id")
            if pair_id is None:
                raise CorpusError(f"{where}: paired corpora require a pair_id")
            span = obj.get("answer_span")
            rec = CorpusRecord(
                id=str(obj.get("id") or f"{path.name}#{line_no}"),
                task=task,
                role=role,
                text=_nfc(text),
                answer_span=_nfc(span) if span else None,
                pair_id=str(pair_id),
            )
            _validate_record(rec, where)
            slot = by_pair.setdefault(rec.pair_id, {})
            if rec.role in slot:
                raise CorpusError(f"{where}: second {role} record for pair_id {pair_id!r}")
            if not slot:
                order.append(rec.pair_id)
            slot[rec.role] = rec
    pairs = []
    for pid in order:
        slot = by_pair[pid]
        if "source" not in slot or "target" not in slot:
            missing = "source" if "source" not in slot else "target"
            raise CorpusError(f"{path.name}: pair_id {pid!r} has no {missing} record")
        pairs.append((slot["source"], slot["target"]))
    return pairs


def write_records(path: str | Path, records: Iterable[CorpusRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def split_unpaired(
    paired_corpus: list[tuple[CorpusRecord, CorpusRecord]],
    source_fraction: float,
    seed: int,
) -> UnpairedSplit:
    """Assign each original pair to exactly one side via a seeded shuffle.

    The source side keeps only source texts, the target side only target
    texts, so no original example contributes to both. Side sizes are
    ``round(n * source_fraction)`` / the remainder.
    """
    if not 0 < source_fraction < 1:
        raise CorpusError(f"source_fraction must be in (0, 1), got {source_fraction}")
    if not paired_corpus:
        raise CorpusError("cannot split an empty corpus")
    for src, tgt in paired_corpus:
        if src.role != "source" or tgt.role != "target":
            raise CorpusError(
                f"pair ({src.id!r}, {tgt.id!r}) has roles ({src.role}, {tgt.role}); "
                "expected (source, target)"
            )
    indices = list(range(len(paired_corpus)))
    random.Random(seed).shuffle(indices)
    n_source = round(len(paired_corpus) * source_fraction)
    source_idx = sorted(indices[:n_source])
    target_idx = sorted(indices[n_source:])
    return UnpairedSplit(
        source_set=tuple(paired_corpus[i][0] for i in source_idx),
        target_set=tuple(paired_corpus[i][1] for i in target_idx),
        seed=seed,
        source_fraction=source_fraction,
    )


def sample_shots(records: list[CorpusRecord], n: int, seed: int) -> list[CorpusRecord]:
    """Seeded sample without replacement, returned in stable id order."""
    if n > len(records):
        raise CorpusError(f"cannot sample {n} shots from {len(records)} records")
    sampled = random.Random(seed).sample(records, n)
    return sorted(sampled, key=lambda rec: rec.id)
