"""The two synthesis phases: source-side IR learning and target-side pairing.

Phase one extracts an IR from every unpaired source and emits the
reconstruction dataset that trains the IR-inversion student. Phase two
annotates every unpaired target with a plausible IR, expands the IRs into
synthetic sources through the student, and assembles the downstream
source -> target training files (validation prompts are synthetic sources
built from the validation target pool, since no real paired validation data
exists).

Every stage persists line-delimited artifacts with raw model output retained
and reads only the prior stage's artifact, so stages re-run independently
and reproduce byte-identical files under the mock backends. Authentic
targets are never rewritten at any point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from . import gateway, ir as ir_schema, prompts
from .corpus import CorpusRecord, count_turns, count_words
from .metrics import CostLedger
from .prompts import BEGIN_MARKERS, FewShotDemo, LengthTargets
from .storage import write_json, write_jsonl

logger = logging.getLogger(__name__)

# Abort thresholds: a high unrecoverable-failure rate signals a template or
# endpoint mismatch, and retrying further just burns teacher budget.
MAX_PARSE_FAILURE_RATE = 0.2
MAX_DROP_RATE = 0.1


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReconstructionExample:
    """One (IR, original source) pair for inversion training."""

    record_id: str
    ir: ir_schema.IRDocument
    source_text: str
    length_targets: LengthTargets
    raw: str = ""

    def to_json(self) -> dict:
        obj = {"record_id": self.record_id, **ir_schema.ir_to_json(self.ir)}
        obj["source_text"] = self.source_text
        obj["length_targets"] = {"words": self.length_targets.words, "turns": self.length_targets.turns}
        obj["raw"] = self.raw
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "ReconstructionExample":
        return cls(
            record_id=obj["record_id"],
            ir=ir_schema.ir_from_json(obj),
            source_text=obj["source_text"],
            length_targets=LengthTargets(
                words=obj["length_targets"]["words"], turns=obj["length_targets"]["turns"]
            ),
            raw=obj.get("raw", ""),
        )


@dataclass(frozen=True)
class Annotation:
    """One unpaired target with its teacher-inferred IR."""

    target: CorpusRecord
    ir: ir_schema.IRDocument
    raw: str = ""
    pool: str = "train"  # "train" | "val"

    def to_json(self) -> dict:
        obj = {"record_id": self.target.id, **ir_schema.ir_to_json(self.ir)}
        obj["target"] = self.target.to_json()
        obj["raw"] = self.raw
        obj["pool"] = self.pool
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Annotation":
        tgt = obj["target"]
        return cls(
            target=CorpusRecord(
                id=tgt["id"],
                task=tgt["task"],
                role=tgt["role"],
                text=tgt["text"],
                answer_span=tgt.get("answer_span"),
                pair_id=tgt.get("pair_id"),
            ),
            ir=ir_schema.ir_from_json(obj),
            raw=obj.get("raw", ""),
            pool=obj.get("pool", "train"),
        )


@dataclass(frozen=True)
class Provenance:
    teacher: str
    student: str
    candidate_index: int
    selected_by: str
    fallback: bool = False

    def to_json(self) -> dict:
        return {
            "teacher": self.teacher,
            "student": self.student,
            "candidate_index": self.candidate_index,
            "selected_by": self.selected_by,
            "fallback": self.fallback,
        }


@dataclass(frozen=True)
class SyntheticPair:
    """A student-generated source aligned with an authentic target."""

    pair_id: str
    target: CorpusRecord
    ir: ir_schema.IRDocument
    synthetic_source: str
    provenance: Provenance
    pool: str = "train"

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "target": self.target.to_json(),
            "ir": ir_schema.ir_to_json(self.ir),
            "synthetic_source": self.synthetic_source,
            "provenance": self.provenance.to_json(),
            "pool": self.pool,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticPair":
        tgt = obj["target"]
        prov = obj["provenance"]
        return cls(
            pair_id=obj["pair_id"],
            target=CorpusRecord(
                id=tgt["id"],
                task=tgt["task"],
                role=tgt["role"],
                text=tgt["text"],
                answer_span=tgt.get("answer_span"),
                pair_id=tgt.get("pair_id"),
            ),
            ir=ir_schema.ir_from_json(obj["ir"]),
            synthetic_source=obj["synthetic_source"],
            provenance=Provenance(
                teacher=prov["teacher"],
                student=prov["student"],
                candidate_index=prov["candidate_index"],
                selected_by=prov["selected_by"],
                fallback=prov.get("fallback", False),
            ),
            pool=obj.get("pool", "train"),
        )


# ---------------------------------------------------------------------------
# Length targets
# ---------------------------------------------------------------------------


def exact_length_targets(task: str, source_text: str) -> LengthTargets:
    """Per-example counts from the true source (reconstruction training)."""
    turns = count_turns(source_text) if task == "dialogue_summ" else None
    return LengthTargets(words=count_words(source_text), turns=turns)


def mean_length_targets(task: str, source_texts: list[str]) -> LengthTargets:
    """Corpus-mean hints used when the true source is unknown (synthesis)."""
    if not source_texts:
        raise PipelineError("cannot derive length hints from an empty shot set")
    words = round(sum(count_words(t) for t in source_texts) / len(source_texts))
    turns = None
    if task == "dialogue_summ":
        turns = round(sum(count_turns(t) for t in source_texts) / len(source_texts))
    return LengthTargets(words=max(1, words), turns=turns)


def size_hint_for(task: str, source_texts: list[str]) -> int:
    """Target-IR prompt hint: mean dialogue line count, else mean word count."""
    targets = mean_length_targets(task, source_texts)
    return targets.turns if task == "dialogue_summ" else targets.words


# ---------------------------------------------------------------------------
# Phase 1: source-side IR extraction and the reconstruction dataset
# ---------------------------------------------------------------------------


def _record_usage(ledger: CostLedger | None, stage: str, role: str, result) -> None:
    if ledger is not None and isinstance(result, gateway.GenerationResult):
        ledger.record(stage, role, result.usage)


def _call_with_retry(
    endpoint: gateway.EndpointProfile,
    messages: list[dict],
    parse,
    ledger: CostLedger | None,
    stage: str,
):
    """One call, and on parse failure one more sample; returns (value, raw) or (None, reason)."""
    raw = ""
    for attempt, overrides in enumerate(({"seed": 0}, {"seed": 1})):
        try:
            result = gateway.complete(endpoint, messages, overrides)
        except gateway.GatewayError as exc:
            return None, f"{type(exc).__name__}: {exc}"
        _record_usage(ledger, stage, endpoint.role, result)
        raw = result.text
        try:
            return parse(result.text), raw
        except (ir_schema.ParseError, ir_schema.ValidationError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            if attempt == 1:
                return None, reason
    return None, "unreachable"


def extract_source_irs(
    sources: list[CorpusRecord],
    teacher: gateway.EndpointProfile,
    task: str,
    variant: str,
    parallelism: int = 1,
    ledger: CostLedger | None = None,
    out_dir: str | Path | None = None,
) -> tuple[list[ReconstructionExample], list[dict]]:
    """Teacher pass over every unpaired source; retry-once on parse failure.

    Aborts when more than 20% of sources fail unrecoverably, which signals a
    template/endpoint mismatch rather than bad luck.
    """
    if not sources:
        raise PipelineError("extract_source_irs requires a non-empty source list")
    requests_list = []
    for rec in sources:
        requests_list.append(
            prompts.render_source_ir_prompt(task, variant, rec.text, answer_span=rec.answer_span)
        )
    first_pass = gateway.complete_batch(teacher, requests_list, parallelism, {"seed": 0})
    examples: list[ReconstructionExample] = []
    failures: list[dict] = []
    for rec, messages, result in zip(sources, requests_list, first_pass):
        parse = lambda text: ir_schema.parse_ir(  # noqa: E731
            text, task, variant, origin="from_source", default_answer=rec.answer_span
        )
        if isinstance(result, gateway.GatewayError):
            parsed, raw = _call_with_retry(teacher, messages, parse, ledger, "extract")
        else:
            _record_usage(ledger, "extract", teacher.role, result)
            raw = result.text
            try:
                parsed = parse(result.text)
            except (ir_schema.ParseError, ir_schema.ValidationError):
                parsed, raw = _call_with_retry(teacher, messages, parse, ledger, "extract")
        if parsed is None:
            failures.append({"record_id": rec.id, "reason": raw})
            continue
        examples.append(
            ReconstructionExample(
                record_id=rec.id,
                ir=parsed,
                source_text=rec.text,
                length_targets=exact_length_targets(task, rec.text),
                raw=raw,
            )
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_jsonl(out_dir / "recon_examples.jsonl", [e.to_json() for e in examples])
        write_json(out_dir / "failures.json", {"failed": failures})
        write_json(out_dir / "stats.json", _extraction_stats(task, examples))
    if len(failures) > MAX_PARSE_FAILURE_RATE * len(sources):
        raise PipelineError(
            f"{len(failures)}/{len(sources)} sources failed IR extraction "
            f"(limit {MAX_PARSE_FAILURE_RATE:.0%}): {[f['record_id'] for f in failures]}"
        )
    return examples, failures


def _extraction_stats(task: str, examples: list[ReconstructionExample]) -> dict:
    stats: dict = {"count": len(examples)}
    if not examples:
        return stats
    if task == "dialogue_summ":
        # density reported, not validated: the 2-3-turns-per-segment guidance
        # has no enforceable hard bound
        densities = []
        for ex in examples:
            n_segments = len(ex.ir.payload.segments)
            turns = ex.length_targets.turns or 0
            if n_segments:
                densities.append(turns / n_segments)
        if densities:
            stats["mean_turns_per_segment"] = round(sum(densities) / len(densities), 2)
    if task == "doc_summ":
        counts = [len(ex.ir.payload.sections) for ex in examples]
        stats["mean_sections"] = round(sum(counts) / len(counts), 2)
    return stats


def flatten_messages(messages: list[dict]) -> str:
    """Trainer-contract prompt text: message bodies joined by blank lines."""
    return "\n\n".join(m["content"] for m in messages)


def reconstruction_record(example: ReconstructionExample) -> dict:
    """Trainer-contract row: inversion prompt -> marker + original source.

    The completion starts with the begin-marker line because the inversion
    prompt demands it as the first output line; extraction strips it again
    downstream.
    """
    messages = prompts.render_synthesis_prompt(example.ir.task, example.ir, example.length_targets)
    completion = BEGIN_MARKERS[example.ir.task] + "\n" + example.source_text
    return {"id": example.record_id, "prompt": flatten_messages(messages), "completion": completion}


def build_reconstruction_dataset(
    examples: list[ReconstructionExample],
    val_fraction: float,
    seed: int,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """Emit seeded train/val trainer-contract files for inversion training."""
    if not examples:
        raise PipelineError("cannot build a reconstruction dataset from zero examples")
    if not 0 <= val_fraction < 1:
        raise PipelineError(f"val_fraction must be in [0, 1), got {val_fraction}")
    import random

    indices = list(range(len(examples)))
    random.Random(seed).shuffle(indices)
    n_val = round(len(examples) * val_fraction)
    val_idx = set(indices[:n_val])
    train_rows = [reconstruction_record(examples[i]) for i in range(len(examples)) if i not in val_idx]
    val_rows = [reconstruction_record(examples[i]) for i in range(len(examples)) if i in val_idx]
    out_dir = Path(out_dir)
    train_path = write_jsonl(out_dir / "recon_train.jsonl", train_rows)
    val_path = write_jsonl(out_dir / "recon_val.jsonl", val_rows)
    return train_path, val_path


# ---------------------------------------------------------------------------
# Phase 2: target annotation, synthesis, downstream dataset
# ---------------------------------------------------------------------------


def build_demos(examples: list[ReconstructionExample], k: int) -> list[FewShotDemo]:
    """First k valid extractions in id order, as (source, canonical IR) demos."""
    chosen = sorted(examples, key=lambda e: e.record_id)[:k]
    return [
        FewShotDemo(source_text=e.source_text, ir_text=ir_schema.render_ir(e.ir)) for e in chosen
    ]


def annotate_target_irs(
    targets: list[CorpusRecord],
    teacher: gateway.EndpointProfile,
    demos: list[FewShotDemo],
    task: str,
    variant: str,
    size_hint: int,
    pools: list[str] | None = None,
    parallelism: int = 1,
    ledger: CostLedger | None = None,
    out_dir: str | Path | None = None,
) -> tuple[list[Annotation], list[dict]]:
    """Teacher pass over every unpaired target (sees only the target + demos)."""
    if not demos:
        raise PipelineError("target annotation requires at least one in-context demo")
    if not targets:
        raise PipelineError("annotate_target_irs requires a non-empty target list")
    if pools is None:
        pools = ["train"] * len(targets)
    requests_list = [
        prompts.render_target_ir_prompt(
            task, variant, demos, rec.text, size_hint, answer_span=rec.answer_span
        )
        for rec in targets
    ]
    first_pass = gateway.complete_batch(teacher, requests_list, parallelism, {"seed": 0})
    annotations: list[Annotation] = []
    failures: list[dict] = []
    for rec, pool, messages, result in zip(targets, pools, requests_list, first_pass):
        parse = lambda text: ir_schema.parse_ir(  # noqa: E731
            text, task, variant, origin="from_target", default_answer=rec.answer_span
        )
        if isinstance(result, gateway.GatewayError):
            parsed, raw = _call_with_retry(teacher, messages, parse, ledger, "annotate")
        else:
            _record_usage(ledger, "annotate", teacher.role, result)
            raw = result.text
            try:
                parsed = parse(result.text)
            except (ir_schema.ParseError, ir_schema.ValidationError):
                parsed, raw = _call_with_retry(teacher, messages, parse, ledger, "annotate")
        if parsed is None:
            failures.append({"record_id": rec.id, "reason": raw})
            continue
        annotations.append(Annotation(target=rec, ir=parsed, raw=raw, pool=pool))
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_jsonl(out_dir / "annotations.jsonl", [a.to_json() for a in annotations])
        write_json(out_dir / "failures.json", {"failed": failures})
    if len(failures) > MAX_PARSE_FAILURE_RATE * len(targets):
        raise PipelineError(
            f"{len(failures)}/{len(targets)} targets failed IR annotation "
            f"(limit {MAX_PARSE_FAILURE_RATE:.0%}): {[f['record_id'] for f in failures]}"
        )
    return annotations, failures


def synthesize_sources(
    annotations: list[Annotation],
    student: gateway.EndpointProfile,
    task: str,
    length_targets: LengthTargets,
    teacher_name: str = "teacher",
    parallelism: int = 1,
    ledger: CostLedger | None = None,
    out_dir: str | Path | None = None,
    overrides: dict | None = None,
) -> tuple[list[SyntheticPair], list[dict]]:
    """Expand each annotated IR into a synthetic source, one pair per target.

    Empty generations are dropped and logged; more than 10% drops aborts the
    stage. Targets pass through byte-identical.
    """
    if not annotations:
        raise PipelineError("synthesize_sources requires a non-empty annotation list")
    requests_list = [
        prompts.render_synthesis_prompt(task, ann.ir, length_targets) for ann in annotations
    ]
    call_overrides = {"seed": 0}
    if overrides:
        call_overrides.update(overrides)
    results = gateway.complete_batch(student, requests_list, parallelism, call_overrides)
    pairs: list[SyntheticPair] = []
    drops: list[dict] = []
    for ann, result in zip(annotations, results):
        if isinstance(result, gateway.GatewayError):
            drops.append({"record_id": ann.target.id, "reason": str(result)})
            continue
        _record_usage(ledger, "synthesize", student.role, result)
        try:
            extraction = prompts.extract_generation(result.text, task)
        except prompts.ExtractionError as exc:
            logger.warning("dropping %s: %s", ann.target.id, exc)
            drops.append({"record_id": ann.target.id, "reason": str(exc)})
            continue
        if not extraction.marker_found:
            logger.warning("no begin marker in generation for %s", ann.target.id)
        pairs.append(
            SyntheticPair(
                pair_id=ann.target.id,
                target=ann.target,
                ir=ann.ir,
                synthetic_source=extraction.text,
                provenance=Provenance(
                    teacher=teacher_name,
                    student=student.name,
                    candidate_index=0,
                    selected_by="single",
                ),
                pool=ann.pool,
            )
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_jsonl(out_dir / "pairs.jsonl", [p.to_json() for p in pairs])
        write_json(out_dir / "drops.json", {"dropped": drops})
    if len(drops) > MAX_DROP_RATE * len(annotations):
        raise PipelineError(
            f"{len(drops)}/{len(annotations)} syntheses dropped "
            f"(limit {MAX_DROP_RATE:.0%}): {[d['record_id'] for d in drops]}"
        )
    return pairs, drops


def downstream_record(pair: SyntheticPair) -> dict:
    """Trainer-contract row: task prompt over the synthetic source -> authentic target."""
    messages = prompts.render_downstream_prompt(
        pair.target.task, pair.synthetic_source, answer_span=pair.target.answer_span
    )
    return {"id": pair.pair_id, "prompt": flatten_messages(messages), "completion": pair.target.text}


def build_downstream_dataset(
    pairs: list[SyntheticPair], val_pairs: list[SyntheticPair], out_dir: str | Path
) -> tuple[Path, Path]:
    """Emit the downstream train file plus the synthetic validation set."""
    if not pairs:
        raise PipelineError("cannot build a downstream dataset from zero pairs")
    out_dir = Path(out_dir)
    train_path = write_jsonl(out_dir / "train.jsonl", [downstream_record(p) for p in pairs])
    val_path = write_jsonl(out_dir / "val.jsonl", [downstream_record(p) for p in val_pairs])
    return train_path, val_path


# ---------------------------------------------------------------------------
# Direct-synthesis baseline (cost comparison only)
# ---------------------------------------------------------------------------


def run_direct_baseline(
    targets: list[CorpusRecord],
    teacher: gateway.EndpointProfile,
    task: str,
    demo_sources: list[str],
    length_targets: LengthTargets,
    parallelism: int = 1,
    ledger: CostLedger | None = None,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Teacher writes a full source per target; feeds the cost ledger's baseline side."""
    requests_list = [
        prompts.render_direct_prompt(
            task, rec.text, demo_sources, length_targets, answer_span=rec.answer_span
        )
        for rec in targets
    ]
    results = gateway.complete_batch(teacher, requests_list, parallelism, {"seed": 0})
    rows: list[dict] = []
    for rec, result in zip(targets, results):
        if isinstance(result, gateway.GatewayError):
            rows.append({"record_id": rec.id, "text": "", "error": str(result)})
            continue
        _record_usage(ledger, "direct", teacher.role, result)
        try:
            extraction = prompts.extract_generation(result.text, task)
            text = extraction.text
        except prompts.ExtractionError:
            text = ""
        rows.append({"record_id": rec.id, "text": text, "raw": result.text})
    if out_dir is not None:
        write_jsonl(Path(out_dir) / "direct.jsonl", rows)
    return rows
