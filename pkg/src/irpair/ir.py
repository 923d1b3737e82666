"""Intermediate-representation schemas: parsing, validation, canonical rendering.

Three task payloads exist:

* ``DialogueIR``  — ordered segment summaries of a conversation.
* ``DocumentIR``  — ordered sections, each a 1-2 sentence summary plus a
  named-entity list.
* ``QuestionIR``  — one masked sentence containing a single ``[BLANK]``,
  3-5 fact bullets, and the answer string.

Each payload admits three surface variants:

* ``sectioned``    — the default flat format (``Segment N:`` lines,
  ``Section N`` blocks, bullet lists).
* ``hierarchical`` — sectioned with one nesting level: dialogue segments are
  grouped in Parts of two, document summaries are split into per-sentence
  ``i.j:`` sub-lines, question bullets are indented under a ``Facts:`` header.
* ``cot``          — a single numbered ``Step N:`` list ending in a ``Plan:``
  line (document steps carry entities in an ``[entities: ...]`` suffix).

All variants are payload-lossless: ``parse_ir(render_ir(d), ...) == d`` for
any valid document. Parsing tolerates leading/trailing prose by scanning for
the first well-formed block and normalizes whitespace; it never raises
anything but :class:`ParseError` / :class:`ValidationError` on arbitrary
input.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

TASKS = ("dialogue_summ", "doc_summ", "question_gen")
VARIANTS = ("sectioned", "hierarchical", "cot")
ORIGINS = ("from_source", "from_target")

BLANK_TOKEN = "[BLANK]"

# Hard bounds for teacher-extracted IRs; section bounds soften to warnings
# for target-annotated IRs because the teacher infers structure blind.
MIN_SECTIONS, MAX_SECTIONS = 3, 7
MIN_BULLETS, MAX_BULLETS = 3, 5

_COT_PLANS = {
    "dialogue_summ": "a dialogue that unfolds in {n} segments.",
    "doc_summ": "an article covering {n} sections.",
    "question_gen": "one paragraph that naturally includes the answer.",
}


class ParseError(ValueError):
    """No recognizable IR block was found in the text."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ValidationError(ValueError):
    """A block was found but violates a payload invariant."""

    def __init__(self, field: str, expected: str, got: str):
        super().__init__(f"{field}: expected {expected}, got {got}")
        self.field = field
        self.expected = expected
        self.got = got


@dataclass(frozen=True)
class DialogueSegment:
    index: int
    summary: str


@dataclass(frozen=True)
class DialogueIR:
    segments: tuple[DialogueSegment, ...]


@dataclass(frozen=True)
class DocumentSection:
    index: int
    summary: str
    entities: tuple[str, ...]


@dataclass(frozen=True)
class DocumentIR:
    sections: tuple[DocumentSection, ...]


@dataclass(frozen=True)
class QuestionIR:
    masked_sentence: str
    bullets: tuple[str, ...]
    answer: str


Payload = DialogueIR | DocumentIR | QuestionIR

_PAYLOAD_FOR_TASK = {
    "dialogue_summ": DialogueIR,
    "doc_summ": DocumentIR,
    "question_gen": QuestionIR,
}


@dataclass(frozen=True)
class IRDocument:
    task: str
    variant: str
    payload: Payload
    origin: str = "from_source"


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: the field, the rule it broke, what was seen."""

    field: str
    rule: str
    observed: str
    severity: str = "error"  # "error" | "warning"


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return re.sub(r"\s+", " ", text).strip()


def split_sentences(text: str) -> list[str]:
    """Split on whitespace that follows ``.``/``!``/``?``.

    Deliberately simple and deterministic; joining the parts with single
    spaces reproduces any whitespace-normalized input exactly.
    """
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p for p in parts if p]


def count_sentences(text: str) -> int:
    return len(split_sentences(text))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_ir(ir: IRDocument) -> str:
    """Deterministic canonical surface form for a valid IRDocument."""
    payload = ir.payload
    if isinstance(payload, DialogueIR):
        return _render_dialogue(payload, ir.variant)
    if isinstance(payload, DocumentIR):
        return _render_document(payload, ir.variant)
    if isinstance(payload, QuestionIR):
        return _render_question(payload, ir.variant)
    raise TypeError(f"unknown payload type {type(payload).__name__}")


def _render_dialogue(payload: DialogueIR, variant: str) -> str:
    segs = payload.segments
    if variant == "sectioned":
        return "\n".join(f"Segment {s.index}: {s.summary}" for s in segs)
    if variant == "hierarchical":
        lines = []
        for part, start in enumerate(range(0, len(segs), 2), start=1):
            lines.append(f"Part {part}:")
            for s in segs[start : start + 2]:
                lines.append(f"  Segment {s.index}: {s.summary}")
        return "\n".join(lines)
    if variant == "cot":
        lines = [f"Step {s.index}: {s.summary}" for s in segs]
        lines.append("Plan: " + _COT_PLANS["dialogue_summ"].format(n=len(segs)))
        return "\n".join(lines)
    raise ValueError(f"unknown variant {variant!r}")


def _entities_line(entities: tuple[str, ...]) -> str:
    return "Entities: " + ", ".join(entities)


def _render_document(payload: DocumentIR, variant: str) -> str:
    secs = payload.sections
    if variant == "sectioned":
        blocks = []
        for s in secs:
            blocks.append(f"Section {s.index}\nSummary: {s.summary}\n{_entities_line(s.entities)}")
        return "\n\n".join(blocks)
    if variant == "hierarchical":
        blocks = []
        for s in secs:
            lines = [f"Section {s.index}"]
            for j, sent in enumerate(split_sentences(s.summary), start=1):
                lines.append(f"  {s.index}.{j}: {sent}")
            lines.append(_entities_line(s.entities))
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)
    if variant == "cot":
        lines = []
        for s in secs:
            suffix = f" [entities: {', '.join(s.entities)}]" if s.entities else " [entities:]"
            lines.append(f"Step {s.index}: {s.summary}{suffix}")
        lines.append("Plan: " + _COT_PLANS["doc_summ"].format(n=len(secs)))
        return "\n".join(lines)
    raise ValueError(f"unknown variant {variant!r}")


def _render_question(payload: QuestionIR, variant: str) -> str:
    if variant == "sectioned":
        lines = [payload.masked_sentence]
        lines.extend(f"• {b}" for b in payload.bullets)
        lines.append(f"Answer: {payload.answer}")
        return "\n".join(lines)
    if variant == "hierarchical":
        lines = [f"Masked: {payload.masked_sentence}", "Facts:"]
        lines.extend(f"  • {b}" for b in payload.bullets)
        lines.append(f"Answer: {payload.answer}")
        return "\n".join(lines)
    if variant == "cot":
        lines = [f"Step {i}: {b}" for i, b in enumerate(payload.bullets, start=1)]
        lines.append(f"Masked: {payload.masked_sentence}")
        lines.append(f"Answer: {payload.answer}")
        lines.append("Plan: " + _COT_PLANS["question_gen"])
        return "\n".join(lines)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SEGMENT_RE = re.compile(r"^\s*Segment\s+(\d+)\s*:\s*(.*)$", re.IGNORECASE)
_PART_RE = re.compile(r"^\s*Part\s+(\d+)\s*:\s*$", re.IGNORECASE)
_STEP_RE = re.compile(r"^\s*Step\s+(\d+)\s*:\s*(.*)$", re.IGNORECASE)
_SECTION_RE = re.compile(r"^\s*Section\s+(\d+)\s*:?\s*$", re.IGNORECASE)
_SUMMARY_RE = re.compile(r"^\s*Summary\s*:\s*(.*)$", re.IGNORECASE)
_ENTITIES_RE = re.compile(r"^\s*Entities\s*:\s*(.*)$", re.IGNORECASE)
_SUB_RE = re.compile(r"^\s*(\d+)\.(\d+)\s*:\s*(.*)$")
_BULLET_RE = re.compile(r"^\s*(?:•|\*|-)\s+(.*)$")
_MASKED_RE = re.compile(r"^\s*Masked\s*:\s*(.*)$", re.IGNORECASE)
_ANSWER_RE = re.compile(r"^\s*Answer\s*:\s*(.*)$", re.IGNORECASE)
_PLAN_RE = re.compile(r"^\s*Plan\s*:\s*(.*)$", re.IGNORECASE)
_FACTS_RE = re.compile(r"^\s*Facts\s*:\s*$", re.IGNORECASE)
_COT_ENT_RE = re.compile(r"^(.*?)\s*\[entities:\s*(.*?)\]\s*$")


def parse_ir(
    text: str,
    task: str,
    variant: str,
    origin: str = "from_source",
    default_answer: str | None = None,
) -> IRDocument:
    """Parse raw model output into a validated IRDocument.

    Leading prose before the first well-formed header is skipped; trailing
    prose after the block is ignored. ``default_answer`` fills the answer
    field when question-task output omits an ``Answer:`` line (the teacher is
    handed the answer and told not to repeat it).

    Raises :class:`ParseError` when no block is found and
    :class:`ValidationError` when a block violates a payload invariant.
    """
    if task not in TASKS:
        raise ParseError(f"unknown task {task!r}")
    if variant not in VARIANTS:
        raise ParseError(f"unknown variant {variant!r}")
    if origin not in ORIGINS:
        raise ParseError(f"unknown origin {origin!r}")
    if not isinstance(text, str):
        raise ParseError(f"expected text, got {type(text).__name__}")
    lines = unicodedata.normalize("NFC", text).replace("\r\n", "\n").replace("\r", "\n").split("\n")

    if task == "dialogue_summ":
        payload: Payload = _parse_dialogue(lines, variant)
    elif task == "doc_summ":
        payload = _parse_document(lines, variant, origin)
    else:
        payload = _parse_question(lines, variant, default_answer)
    return IRDocument(task=task, variant=variant, payload=payload, origin=origin)


def _check_contiguous(indices: list[int], field: str) -> None:
    expected = list(range(1, len(indices) + 1))
    if indices != expected:
        raise ValidationError(field, f"contiguous indices {expected}", str(indices))


def _parse_dialogue(lines: list[str], variant: str) -> DialogueIR:
    if variant == "hierarchical":
        part_indices: list[int] = []
        segments: list[DialogueSegment] = []
        started = False
        for line in lines:
            part = _PART_RE.match(line)
            seg = _SEGMENT_RE.match(line)
            if part:
                started = True
                part_indices.append(int(part.group(1)))
            elif seg and started:
                summary = normalize_ws(seg.group(2))
                if not summary:
                    raise ValidationError(f"segments[{seg.group(1)}].summary", "non-empty", "empty")
                segments.append(DialogueSegment(int(seg.group(1)), summary))
            elif started and normalize_ws(line):
                break
        if not started or not segments:
            raise ParseError("no Part/Segment block found")
        _check_contiguous(part_indices, "parts.index")
        _check_contiguous([s.index for s in segments], "segments.index")
        return DialogueIR(tuple(segments))

    pattern = _STEP_RE if variant == "cot" else _SEGMENT_RE
    label = "steps" if variant == "cot" else "segments"
    segments = []
    plan_seen = False
    for line in lines:
        match = pattern.match(line)
        if match:
            summary = normalize_ws(match.group(2))
            if not summary:
                raise ValidationError(f"{label}[{match.group(1)}].summary", "non-empty", "empty")
            segments.append(DialogueSegment(int(match.group(1)), summary))
        elif segments:
            if variant == "cot" and _PLAN_RE.match(line):
                plan_seen = True
            break
    if not segments:
        raise ParseError(f"no '{'Step' if variant == 'cot' else 'Segment'} N:' lines found")
    if variant == "cot" and not plan_seen:
        raise ValidationError("plan", "a final 'Plan:' line", "absent")
    _check_contiguous([s.index for s in segments], "segments.index")
    return DialogueIR(tuple(segments))


def _finish_section(
    index: int, summary_parts: list[str], entities: tuple[str, ...] | None
) -> DocumentSection:
    summary = normalize_ws(" ".join(summary_parts))
    if not summary:
        raise ValidationError(f"sections[{index}].summary", "non-empty", "empty")
    if entities is None:
        raise ValidationError(f"sections[{index}].entities", "an 'Entities:' line", "absent")
    return DocumentSection(index, summary, entities)


def _parse_entities(raw: str) -> tuple[str, ...]:
    return tuple(e.strip() for e in raw.split(",") if e.strip())


def _parse_document(lines: list[str], variant: str, origin: str) -> DocumentIR:
    sections: list[DocumentSection] = []

    if variant == "cot":
        plan_seen = False
        for line in lines:
            match = _STEP_RE.match(line)
            if match:
                body = match.group(2).strip()
                ent_match = _COT_ENT_RE.match(body)
                if ent_match:
                    summary, entities = ent_match.group(1), _parse_entities(ent_match.group(2))
                else:
                    summary, entities = body, ()
                summary = normalize_ws(summary)
                if not summary:
                    raise ValidationError(f"sections[{match.group(1)}].summary", "non-empty", "empty")
                sections.append(DocumentSection(int(match.group(1)), summary, entities))
            elif sections:
                if _PLAN_RE.match(line):
                    plan_seen = True
                break
        if not sections:
            raise ParseError("no 'Step N:' lines found")
        if not plan_seen:
            raise ValidationError("plan", "a final 'Plan:' line", "absent")
    else:
        index: int | None = None
        summary_parts: list[str] = []
        subs: list[tuple[int, str]] = []
        entities: tuple[str, ...] | None = None
        closed = False

        def close() -> None:
            nonlocal index, summary_parts, subs, entities
            if index is None:
                return
            if variant == "hierarchical":
                _check_contiguous([j for j, _ in subs], f"sections[{index}].subsections")
                summary_parts = [s for _, s in subs]
            sections.append(_finish_section(index, summary_parts, entities))
            index, summary_parts, subs, entities = None, [], [], None

        for line in lines:
            if closed:
                break
            header = _SECTION_RE.match(line)
            if header:
                close()
                index = int(header.group(1))
                continue
            if index is None:
                continue
            if variant == "hierarchical":
                sub = _SUB_RE.match(line)
                if sub:
                    if int(sub.group(1)) != index:
                        raise ValidationError(
                            f"sections[{index}].subsections",
                            f"sub-index prefix {index}",
                            sub.group(1),
                        )
                    sent = normalize_ws(sub.group(3))
                    if not sent:
                        raise ValidationError(
                            f"sections[{index}].subsections[{sub.group(2)}]", "non-empty", "empty"
                        )
                    subs.append((int(sub.group(2)), sent))
                    continue
            else:
                summ = _SUMMARY_RE.match(line)
                if summ:
                    summary_parts.append(summ.group(1))
                    continue
            ents = _ENTITIES_RE.match(line)
            if ents:
                entities = _parse_entities(ents.group(1))
                continue
            if not normalize_ws(line):
                continue
            if variant == "sectioned" and summary_parts and entities is None:
                # continuation of a wrapped summary line
                summary_parts.append(line)
                continue
            closed = True
        close()
        if not sections:
            raise ParseError("no 'Section N' blocks found")

    _check_contiguous([s.index for s in sections], "sections.index")
    if origin == "from_source" and not MIN_SECTIONS <= len(sections) <= MAX_SECTIONS:
        raise ValidationError(
            "sections.count", f"{MIN_SECTIONS}..{MAX_SECTIONS}", str(len(sections))
        )
    return DocumentIR(tuple(sections))


def _validate_masked(masked: str) -> str:
    masked = normalize_ws(masked)
    occurrences = masked.count(BLANK_TOKEN)
    if occurrences != 1:
        raise ValidationError("masked_sentence", f"exactly one {BLANK_TOKEN}", f"{occurrences}")
    return masked


def _finish_question(
    masked: str | None, bullets: list[str], answer: str | None, default_answer: str | None
) -> QuestionIR:
    if masked is None:
        raise ParseError("no masked sentence containing [BLANK] found")
    if not MIN_BULLETS <= len(bullets) <= MAX_BULLETS:
        raise ValidationError("bullets.count", f"{MIN_BULLETS}..{MAX_BULLETS}", str(len(bullets)))
    if answer is None:
        answer = default_answer
    answer = normalize_ws(answer) if answer else ""
    if not answer:
        raise ValidationError("answer", "non-empty", "empty")
    return QuestionIR(_validate_masked(masked), tuple(bullets), answer)


def _parse_question(lines: list[str], variant: str, default_answer: str | None) -> QuestionIR:
    masked: str | None = None
    bullets: list[str] = []
    answer: str | None = None

    if variant == "cot":
        plan_seen = False
        for line in lines:
            step = _STEP_RE.match(line)
            if step:
                bullet = normalize_ws(step.group(2))
                if not bullet:
                    raise ValidationError(f"bullets[{step.group(1)}]", "non-empty", "empty")
                bullets.append(bullet)
                continue
            if not bullets:
                continue
            masked_m = _MASKED_RE.match(line)
            answer_m = _ANSWER_RE.match(line)
            if masked_m:
                masked = masked_m.group(1)
            elif answer_m:
                answer = answer_m.group(1)
            elif _PLAN_RE.match(line):
                plan_seen = True
                break
            elif normalize_ws(line):
                break
        if not bullets:
            raise ParseError("no 'Step N:' lines found")
        if not plan_seen:
            raise ValidationError("plan", "a final 'Plan:' line", "absent")
        return _finish_question(masked, bullets, answer, default_answer)

    if variant == "hierarchical":
        in_facts = False
        for line in lines:
            masked_m = _MASKED_RE.match(line)
            if masked_m and masked is None:
                masked = masked_m.group(1)
                continue
            if masked is None:
                continue
            if _FACTS_RE.match(line):
                in_facts = True
                continue
            bullet = _BULLET_RE.match(line)
            answer_m = _ANSWER_RE.match(line)
            if in_facts and bullet:
                text = normalize_ws(bullet.group(1))
                if text:
                    bullets.append(text)
            elif answer_m:
                answer = answer_m.group(1)
                break
            elif normalize_ws(line):
                break
        if masked is None:
            raise ParseError("no 'Masked:' line found")
        return _finish_question(masked, bullets, answer, default_answer)

    # sectioned: first [BLANK] line, then bullets, then an optional answer
    for line in lines:
        if masked is None:
            if BLANK_TOKEN in line:
                masked = line
            continue
        bullet = _BULLET_RE.match(line)
        answer_m = _ANSWER_RE.match(line)
        if bullet:
            text = normalize_ws(bullet.group(1))
            if text:
                bullets.append(text)
        elif answer_m:
            answer = answer_m.group(1)
            break
        elif normalize_ws(line) and bullets:
            break
    return _finish_question(masked, bullets, answer, default_answer)


# ---------------------------------------------------------------------------
# Validation diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskConstraints:
    min_sections: int = MIN_SECTIONS
    max_sections: int = MAX_SECTIONS
    min_bullets: int = MIN_BULLETS
    max_bullets: int = MAX_BULLETS
    max_summary_sentences: int = 2
    max_dialogue_sentences: int = 1


def validate_ir(ir: IRDocument, constraints: TaskConstraints | None = None) -> list[Diagnostic]:
    """Check every invariant and constraint; diagnostics are the output.

    An empty list means the document is fully valid. Soft constraints
    (section-count bounds for target-annotated IRs, sentence-count guidance)
    surface as ``severity="warning"`` entries; hard invariant breaks are
    ``severity="error"``.
    """
    c = constraints or TaskConstraints()
    diags: list[Diagnostic] = []
    payload = ir.payload

    if ir.task not in TASKS:
        diags.append(Diagnostic("task", f"one of {TASKS}", repr(ir.task)))
    if ir.variant not in VARIANTS:
        diags.append(Diagnostic("variant", f"one of {VARIANTS}", repr(ir.variant)))
    if ir.origin not in ORIGINS:
        diags.append(Diagnostic("origin", f"one of {ORIGINS}", repr(ir.origin)))
    expected_type = _PAYLOAD_FOR_TASK.get(ir.task)
    if expected_type is not None and not isinstance(payload, expected_type):
        diags.append(
            Diagnostic("payload", expected_type.__name__, type(payload).__name__)
        )
        return diags

    def check_text(field: str, value: str) -> None:
        if not value.strip():
            diags.append(Diagnostic(field, "non-empty", "empty"))
        elif value != normalize_ws(value):
            diags.append(Diagnostic(field, "whitespace-normalized", repr(value)))

    if isinstance(payload, DialogueIR):
        if len(payload.segments) < 1:
            diags.append(Diagnostic("segments.count", ">= 1", "0"))
        indices = [s.index for s in payload.segments]
        if indices != list(range(1, len(indices) + 1)):
            diags.append(Diagnostic("segments.index", "contiguous from 1", str(indices)))
        for s in payload.segments:
            check_text(f"segments[{s.index}].summary", s.summary)
            if count_sentences(s.summary) > c.max_dialogue_sentences:
                diags.append(
                    Diagnostic(
                        f"segments[{s.index}].summary",
                        f"<= {c.max_dialogue_sentences} sentence(s)",
                        str(count_sentences(s.summary)),
                        severity="warning",
                    )
                )
    elif isinstance(payload, DocumentIR):
        count = len(payload.sections)
        if not c.min_sections <= count <= c.max_sections:
            severity = "warning" if ir.origin == "from_target" else "error"
            diags.append(
                Diagnostic(
                    "sections.count",
                    f"{c.min_sections}..{c.max_sections}",
                    str(count),
                    severity=severity,
                )
            )
        indices = [s.index for s in payload.sections]
        if indices != list(range(1, len(indices) + 1)):
            diags.append(Diagnostic("sections.index", "contiguous from 1", str(indices)))
        for s in payload.sections:
            check_text(f"sections[{s.index}].summary", s.summary)
            if count_sentences(s.summary) > c.max_summary_sentences:
                diags.append(
                    Diagnostic(
                        f"sections[{s.index}].summary",
                        f"<= {c.max_summary_sentences} sentences",
                        str(count_sentences(s.summary)),
                        severity="warning",
                    )
                )
            for ent in s.entities:
                if not ent.strip() or "," in ent:
                    diags.append(
                        Diagnostic(f"sections[{s.index}].entities", "comma-free, non-empty", repr(ent))
                    )
    elif isinstance(payload, QuestionIR):
        occurrences = payload.masked_sentence.count(BLANK_TOKEN)
        if occurrences != 1:
            diags.append(
                Diagnostic("masked_sentence", f"exactly one {BLANK_TOKEN}", str(occurrences))
            )
        check_text("masked_sentence", payload.masked_sentence)
        if not c.min_bullets <= len(payload.bullets) <= c.max_bullets:
            diags.append(
                Diagnostic("bullets.count", f"{c.min_bullets}..{c.max_bullets}", str(len(payload.bullets)))
            )
        for i, b in enumerate(payload.bullets, start=1):
            check_text(f"bullets[{i}]", b)
        check_text("answer", payload.answer)
    return diags


def is_valid(ir: IRDocument, constraints: TaskConstraints | None = None) -> bool:
    return not any(d.severity == "error" for d in validate_ir(ir, constraints))


# ---------------------------------------------------------------------------
# Serialization (line-delimited artifact records)
# ---------------------------------------------------------------------------


def payload_to_json(payload: Payload) -> dict:
    if isinstance(payload, DialogueIR):
        return {
            "segments": [{"index": s.index, "summary": s.summary} for s in payload.segments]
        }
    if isinstance(payload, DocumentIR):
        return {
            "sections": [
                {"index": s.index, "summary": s.summary, "entities": list(s.entities)}
                for s in payload.sections
            ]
        }
    if isinstance(payload, QuestionIR):
        return {
            "masked_sentence": payload.masked_sentence,
            "bullets": list(payload.bullets),
            "answer": payload.answer,
        }
    raise TypeError(f"unknown payload type {type(payload).__name__}")


def ir_to_json(ir: IRDocument) -> dict:
    return {
        "task": ir.task,
        "variant": ir.variant,
        "origin": ir.origin,
        "payload": payload_to_json(ir.payload),
    }


def ir_from_json(obj: dict) -> IRDocument:
    task = obj["task"]
    payload_obj = obj["payload"]
    if task == "dialogue_summ":
        payload: Payload = DialogueIR(
            tuple(DialogueSegment(s["index"], s["summary"]) for s in payload_obj["segments"])
        )
    elif task == "doc_summ":
        payload = DocumentIR(
            tuple(
                DocumentSection(s["index"], s["summary"], tuple(s["entities"]))
                for s in payload_obj["sections"]
            )
        )
    elif task == "question_gen":
        payload = QuestionIR(
            payload_obj["masked_sentence"],
            tuple(payload_obj["bullets"]),
            payload_obj["answer"],
        )
    else:
        raise ValueError(f"unknown task {task!r}")
    return IRDocument(task=task, variant=obj["variant"], payload=payload, origin=obj["origin"])
