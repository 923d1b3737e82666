"""Prompt rendering for the teacher and student model families.

Every prompt surface is an external text asset under ``templates/``, keyed by
family and task (teacher families also by IR variant). Each asset holds the
system message and the user-message layout separated by a literal
``=== user ===`` line, so prompt edits never require a code change.

Documented placeholders: ``{m}`` (target turn count), ``{N}`` (target word
count), ``{n}`` (approximate source line count), ``{demos}`` (few-shot
blocks), ``{input}`` (the query text or rendered IR), ``{answer}`` (answer
span, question task), ``{target}`` (pair target, judge/ranker prompts).
Rendering is deterministic and substitution is literal: braces inside user
data are never interpreted, and rendered output is scanned for residual
unbound placeholders.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from . import ir as ir_schema

PLACEHOLDERS = ("m", "N", "n", "demos", "input", "answer", "target")

FAMILIES = (
    "source_ir",
    "target_ir",
    "ir_inversion",
    "consistency_judge",
    "rubric_judge",
    "ranker",
    "direct_synthesis",
    "downstream",
)

BEGIN_MARKERS = {
    "dialogue_summ": "=== Dialogue Begins ===",
    "doc_summ": "=== Document Begins ===",
    "question_gen": "=== Paragraph Begins ===",
}

INPUT_LABELS = {
    "dialogue_summ": "Dialogue",
    "doc_summ": "Document",
    "question_gen": "Paragraph",
}

RUBRIC_DIMENSIONS = ("coherence", "consistency", "relevance", "fluency")

_USER_SEPARATOR = "=== user ==="
_TEMPLATE_ROOT = Path(__file__).parent / "templates"
_RESIDUE_RE = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")


class PromptError(ValueError):
    """A template is missing, malformed, or was rendered with unbound slots."""


class ExtractionError(ValueError):
    """Model output was empty after begin-marker extraction."""


@dataclass(frozen=True)
class FewShotDemo:
    """One in-context example: a source text and its canonical IR rendering."""

    source_text: str
    ir_text: str


@dataclass(frozen=True)
class Extraction:
    """Generation body text; ``marker_found`` is False on the fallback path."""

    text: str
    marker_found: bool


@dataclass(frozen=True)
class LengthTargets:
    """Length guidance for synthesis: words always, turns for dialogues."""

    words: int
    turns: int | None = None


@lru_cache(maxsize=None)
def load_template(family: str, task: str | None = None, name: str = "default") -> tuple[str, str]:
    """Load one template asset, returning (system body, user body)."""
    parts = [family] + ([task] if task else []) + [f"{name}.txt"]
    path = _TEMPLATE_ROOT.joinpath(*parts)
    if not path.exists():
        raise PromptError(f"no template for (family={family}, task={task}, name={name})")
    raw = path.read_text(encoding="utf-8")
    if f"\n{_USER_SEPARATOR}\n" not in raw:
        raise PromptError(f"template {path} lacks the '{_USER_SEPARATOR}' separator")
    system_body, user_body = raw.split(f"\n{_USER_SEPARATOR}\n", 1)
    return system_body.strip("\n"), user_body.strip("\n")


def _substitute(body: str, values: dict[str, str]) -> str:
    # Single-pass template substitution: slots inside user data are data,
    # never re-expanded, and str.format would choke on braces in user text.
    unbound: list[str] = []

    def fill(match: re.Match) -> str:
        key = match.group(1)
        if key in values:
            return values[key]
        unbound.append(key)
        return match.group(0)

    out = _RESIDUE_RE.sub(fill, body)
    if unbound:
        raise PromptError(f"unbound placeholder {{{unbound[0]}}} in rendered prompt")
    return out


def _messages(family: str, task: str | None, name: str, values: dict[str, str]) -> list[dict]:
    system_body, user_body = load_template(family, task, name)
    return [
        {"role": "system", "content": _substitute(system_body, values)},
        {"role": "user", "content": _substitute(user_body, values)},
    ]


def render_demo_block(demos: list[FewShotDemo]) -> str:
    blocks = []
    for i, demo in enumerate(demos, start=1):
        blocks.append(f"Example {i}\nSource:\n{demo.source_text}\nIR:\n{demo.ir_text}\n")
    return "\n".join(blocks) + "\n" if blocks else ""


def render_source_demo_block(source_texts: list[str]) -> str:
    blocks = [f"Example {i}\n{text}\n" for i, text in enumerate(source_texts, start=1)]
    return "\n".join(blocks) + "\n" if blocks else ""


def render_source_ir_prompt(
    task: str, variant: str, input_text: str, answer_span: str | None = None
) -> list[dict]:
    """Teacher prompt: compress one raw source into an IR."""
    values = {"input": input_text}
    if task == "question_gen":
        if not answer_span:
            raise PromptError("question_gen source-IR prompts require an answer span")
        values["answer"] = answer_span
    return _messages("source_ir", task, variant, values)


def render_target_ir_prompt(
    task: str,
    variant: str,
    demos: list[FewShotDemo],
    target_text: str,
    size_hint: int,
    answer_span: str | None = None,
) -> list[dict]:
    """Teacher prompt: infer a plausible IR for an unpaired target.

    ``size_hint`` is the shot-set statistic for the unseen source: mean
    dialogue line count for dialogues, mean word count otherwise.
    """
    if not demos:
        raise PromptError("target-IR annotation requires at least one in-context demo")
    if size_hint <= 0:
        raise PromptError(f"size_hint must be positive, got {size_hint}")
    values = {
        "demos": render_demo_block(demos),
        "input": target_text,
        "n": str(size_hint),
        "N": str(size_hint),
    }
    if task == "question_gen":
        if not answer_span:
            raise PromptError("question_gen target-IR prompts require an answer span")
        values["answer"] = answer_span
    return _messages("target_ir", task, variant, values)


def render_synthesis_prompt(
    task: str, ir: ir_schema.IRDocument, length_targets: LengthTargets
) -> list[dict]:
    """Student prompt: expand an IR into a full source text."""
    if length_targets.words <= 0:
        raise PromptError(f"target word count must be positive, got {length_targets.words}")
    values = {"input": ir_schema.render_ir(ir), "N": str(length_targets.words)}
    if task == "dialogue_summ":
        if length_targets.turns is None:
            raise PromptError("dialogue synthesis requires a target turn count")
        values["m"] = str(length_targets.turns)
    return _messages("ir_inversion", task, "default", values)


def render_direct_prompt(
    task: str,
    target_text: str,
    demo_sources: list[str],
    length_targets: LengthTargets,
    answer_span: str | None = None,
) -> list[dict]:
    """Baseline prompt: generate a full source directly from the target."""
    values = {
        "demos": render_source_demo_block(demo_sources),
        "input": target_text,
        "N": str(length_targets.words),
    }
    if task == "dialogue_summ":
        if length_targets.turns is None:
            raise PromptError("dialogue direct synthesis requires a target turn count")
        values["m"] = str(length_targets.turns)
    if task == "question_gen":
        if not answer_span:
            raise PromptError("question_gen direct synthesis requires an answer span")
        values["answer"] = answer_span
    return _messages("direct_synthesis", task, "default", values)


def render_downstream_prompt(task: str, source_text: str, answer_span: str | None = None) -> list[dict]:
    """Task prompt for the downstream source -> target model."""
    values = {"input": source_text}
    if task == "question_gen":
        if not answer_span:
            raise PromptError("question_gen downstream prompts require an answer span")
        values["answer"] = answer_span
    return _messages("downstream", task, "default", values)


def render_consistency_prompt(task: str, candidate_source: str, target_text: str) -> list[dict]:
    return _messages(
        "consistency_judge", task, "default", {"input": candidate_source, "target": target_text}
    )


def render_ranker_prompt(task: str, candidate_source: str, target_text: str) -> list[dict]:
    return _messages("ranker", task, "default", {"input": candidate_source, "target": target_text})


def render_rubric_prompt(dimension: str, prediction: str, source_text: str) -> list[dict]:
    if dimension not in RUBRIC_DIMENSIONS:
        raise PromptError(f"unknown rubric dimension {dimension!r}")
    return _messages("rubric_judge", None, dimension, {"input": source_text, "target": prediction})


def extract_generation(raw: str, task: str) -> Extraction:
    """Strip everything up to and including the begin-marker line.

    Output without the marker is returned whole with ``marker_found=False``
    so callers can log the anomaly. An empty body is an error.
    """
    marker = BEGIN_MARKERS[task]
    lines = raw.split("\n")
    body: str | None = None
    for i, line in enumerate(lines):
        if line.strip() == marker:
            body = "\n".join(lines[i + 1 :]).strip()
            break
    if body is None:
        text = raw.strip()
        if not text:
            raise ExtractionError("empty generation")
        return Extraction(text=text, marker_found=False)
    if not body:
        raise ExtractionError("empty generation after begin marker")
    return Extraction(text=body, marker_found=True)
