"""Deterministic rule-based mock backends, selected via ``mock://<behavior>``.

These make the whole pipeline executable and testable with zero model
weights. Every reply is a pure function of (messages, temperature, seed)
except ``cycle``, which is a stateful test helper.

Behaviors:

* ``teacher`` — extractive IR generation. Dialogues: first sentence of every
  2-turn window. Documents: lead sentence per ~100-word block plus
  capitalized-word entities. Question task: the answer-containing sentence
  with the span replaced by ``[BLANK]`` and up to 4 neighboring sentences as
  bullets. Also annotates bare targets and serves the direct-synthesis
  baseline (full-length expansion of the target).
* ``student`` — IR inversion by concatenating IR summaries into a source;
  the dialogue path alternates two speaker labels. Seeded sampling varies
  speaker names / connectives so best-of-n candidates are distinct yet
  reproducible. Also answers downstream task prompts extractively.
* ``judge`` — CONSISTENT iff candidate and target share at least one content
  word of length >= 5; rubric prompts get a constant score.
* ``ranker`` — scores by content-word overlap count.
* ``constant?text=...`` / ``cycle?texts=a|b`` — scripted replies for tests.
"""

from __future__ import annotations

import math
import re
import threading
import urllib.parse

from . import ir as ir_schema
from .corpus import TURN_RE, count_words
from .ir import (
    DialogueIR,
    DialogueSegment,
    DocumentIR,
    DocumentSection,
    IRDocument,
    QuestionIR,
    normalize_ws,
    split_sentences,
)
from .prompts import BEGIN_MARKERS

_CAPWORD_RE = re.compile(r"\b[A-Z][a-zA-Z]+\b")
_CONTENT_RE = re.compile(r"[a-zA-Z]{5,}")

_SPEAKER_PAIRS = [
    ("Alex", "Sam"),
    ("Maya", "Liam"),
    ("Priya", "Omar"),
    ("Nora", "Felix"),
    ("Ivy", "Marco"),
    ("Tara", "Jonas"),
]
_FILLERS = ["I see.", "Right.", "Okay.", "Got it.", "Sure."]
_CONNECTIVES = ["", "Meanwhile, ", "In addition, ", "Later, ", "Separately, ", "Subsequently, "]
_DIRECT_LEADS = [
    "",
    "In further detail, ",
    "Reports add that ",
    "Observers note that ",
    "Meanwhile, ",
    "Officials said ",
]

_cycle_lock = threading.Lock()
_cycle_counters: dict[str, int] = {}


class MockError(ValueError):
    """The mock backend received a prompt it has no rule for."""


def reset_cycles() -> None:
    with _cycle_lock:
        _cycle_counters.clear()


def content_words(text: str) -> set[str]:
    return {w.lower() for w in _CONTENT_RE.findall(text)}


def _first_sentence(text: str) -> str:
    sentences = split_sentences(text)
    return normalize_ws(sentences[0]) if sentences else ""


def _utterance(turn_line: str) -> str:
    return turn_line.split(":", 1)[1].strip() if ":" in turn_line else turn_line.strip()


def _entities(text: str, limit: int = 5) -> tuple[str, ...]:
    seen: list[str] = []
    for word in _CAPWORD_RE.findall(text):
        if word not in seen:
            seen.append(word)
        if len(seen) == limit:
            break
    return tuple(seen)


def _after(text: str, marker: str) -> str:
    if marker not in text:
        raise MockError(f"mock could not locate {marker!r} in the prompt")
    return text.rsplit(marker, 1)[1].strip()


def _between(text: str, start: str, end: str) -> str:
    head = _after(text, start)
    return head.split(end, 1)[0].strip() if end in head else head


def _int_after(text: str, pattern: str, default: int) -> int:
    match = re.search(pattern, text)
    return int(match.group(1)) if match else default


def respond(base_url: str, messages: list[dict], temperature: float, seed: int | None) -> str:
    """Produce the mock reply for one chat-completion request."""
    parts = urllib.parse.urlsplit(base_url)
    behavior = parts.netloc or parts.path.strip("/")
    query = urllib.parse.parse_qs(parts.query)
    system = "\n".join(m["content"] for m in messages if m.get("role") == "system")
    user = "\n".join(m["content"] for m in messages if m.get("role") == "user")
    effective_seed = seed if (seed is not None and temperature > 0) else 0

    if behavior == "constant":
        return query.get("text", [""])[0]
    if behavior == "cycle":
        texts = query.get("texts", [""])[0].split("|")
        with _cycle_lock:
            idx = _cycle_counters.get(base_url, 0)
            _cycle_counters[base_url] = idx + 1
        return texts[idx % len(texts)]
    if behavior == "teacher":
        return _teacher(system, user)
    if behavior == "student":
        return _student(system, user, effective_seed)
    if behavior == "judge":
        return _judge(system, user)
    if behavior == "ranker":
        return _ranker(user)
    raise MockError(f"unknown mock behavior {behavior!r}")


def _detect_variant(system: str) -> str:
    if "Step 1:" in system:
        return "cot"
    if "Part 1:" in system or "N.1:" in system or "1.1:" in system or "Facts:" in system:
        return "hierarchical"
    return "sectioned"


# ---------------------------------------------------------------------------
# Teacher rules
# ---------------------------------------------------------------------------


def _teacher(system: str, user: str) -> str:
    variant = _detect_variant(system)
    if "Now write the IR for this dialogue summary." in user:
        return _annotate_dialogue(user, variant)
    if "Now write the IR for this document summary." in user:
        return _annotate_document(user, variant)
    if "Now write the IR for this question." in user:
        return _annotate_question(user, variant)
    if "Write the full dialogue for this summary." in user:
        return _direct_dialogue(system, user)
    if "Write the full document for this summary." in user:
        return _direct_document(system, user)
    if "Write the full paragraph for this question." in user:
        return _direct_question(system, user)
    if user.startswith("Dialogue:"):
        return _extract_dialogue(user, variant)
    if user.startswith("Document:"):
        return _extract_document(user, variant)
    if user.startswith("Paragraph:"):
        return _extract_question(user, variant)
    raise MockError("teacher mock has no rule for this prompt")


def _extract_dialogue(user: str, variant: str) -> str:
    dialogue = _after(user, "Dialogue:")
    turns = [line for line in dialogue.split("\n") if TURN_RE.match(line)]
    if not turns:
        turns = [dialogue]
    segments = []
    for i, start in enumerate(range(0, len(turns), 2), start=1):
        sentence = _first_sentence(_utterance(turns[start]))
        segments.append(DialogueSegment(i, sentence or "(inaudible)"))
    doc = IRDocument("dialogue_summ", variant, DialogueIR(tuple(segments)))
    return ir_schema.render_ir(doc)


def _extract_document(user: str, variant: str) -> str:
    text = _after(user, "Document:")
    sentences = split_sentences(text)
    n_sections = max(3, min(7, math.ceil(count_words(text) / 100)))
    n_sections = min(n_sections, len(sentences)) or 1
    # contiguous, balanced sentence chunks
    base, extra = divmod(len(sentences), n_sections)
    sections = []
    pos = 0
    for i in range(1, n_sections + 1):
        size = base + (1 if i <= extra else 0)
        chunk = sentences[pos : pos + size]
        pos += size
        sections.append(
            DocumentSection(i, normalize_ws(chunk[0]), _entities(" ".join(chunk)))
        )
    doc = IRDocument("doc_summ", variant, DocumentIR(tuple(sections)))
    return ir_schema.render_ir(doc)


def _extract_question(user: str, variant: str) -> str:
    paragraph = _between(user, "Paragraph:", "\nAnswer span:")
    answer = _after(user, "Answer span:")
    sentences = [normalize_ws(s) for s in split_sentences(paragraph)]
    ans_idx = next((i for i, s in enumerate(sentences) if answer in s), 0)
    masked = sentences[ans_idx].replace(answer, "[BLANK]", 1)
    neighbor_idx = [i for i in range(ans_idx + 1, len(sentences))]
    neighbor_idx += [i for i in range(ans_idx - 1, -1, -1)]
    chosen = sorted(neighbor_idx[:4])
    bullets = tuple(sentences[i] for i in chosen)
    doc = IRDocument("question_gen", variant, QuestionIR(masked, bullets, normalize_ws(answer)))
    rendered = ir_schema.render_ir(doc)
    # teacher output format omits the answer line (the answer is an input)
    return "\n".join(l for l in rendered.split("\n") if not l.startswith("Answer:"))


def _annotate_dialogue(user: str, variant: str) -> str:
    summary = _after(user, "\nSummary:")
    segments = tuple(
        DialogueSegment(i, normalize_ws(s))
        for i, s in enumerate(split_sentences(summary), start=1)
    )
    doc = IRDocument("dialogue_summ", variant, DialogueIR(segments), origin="from_target")
    return ir_schema.render_ir(doc)


def _annotate_document(user: str, variant: str) -> str:
    summary = _after(user, "\nSummary:")
    sections = tuple(
        DocumentSection(i, normalize_ws(s), _entities(s))
        for i, s in enumerate(split_sentences(summary), start=1)
    )
    doc = IRDocument("doc_summ", variant, DocumentIR(sections), origin="from_target")
    return ir_schema.render_ir(doc)


def _annotate_question(user: str, variant: str) -> str:
    question = _between(user, "\nQuestion:", "\nAnswer:")
    masked = question.rstrip("?").strip() + ": [BLANK]."
    words = sorted(content_words(question))
    bullets = [f"Mentions {w}." for w in words[:4]]
    while len(bullets) < 3:
        bullets.append(f"Relates to point {len(bullets) + 1} of the passage.")
    doc = IRDocument(
        "question_gen",
        variant,
        QuestionIR(normalize_ws(masked), tuple(bullets), "unused"),
        origin="from_target",
    )
    rendered = ir_schema.render_ir(doc)
    return "\n".join(l for l in rendered.split("\n") if not l.startswith("Answer:"))


def _direct_dialogue(system: str, user: str) -> str:
    summary = _after(user, "\nSummary:")
    m = _int_after(system + user, r"about (\d+) turns", 8)
    sentences = [normalize_ws(s) for s in split_sentences(summary)] or [summary]
    lines = []
    for i in range(m):
        name = ("A", "B")[i % 2]
        lead = _DIRECT_LEADS[i % len(_DIRECT_LEADS)]
        lines.append(f"{name}: {lead}{sentences[i % len(sentences)]}")
    return BEGIN_MARKERS["dialogue_summ"] + "\n" + "\n".join(lines)


def _direct_document(system: str, user: str) -> str:
    summary = _after(user, "\nSummary:")
    n_words = _int_after(system + user, r"around (\d+) words", 120)
    sentences = [normalize_ws(s) for s in split_sentences(summary)] or [summary]
    parts: list[str] = []
    i = 0
    while count_words(" ".join(parts)) < n_words:
        lead = _DIRECT_LEADS[i % len(_DIRECT_LEADS)]
        parts.append(f"{lead}{sentences[i % len(sentences)]}")
        i += 1
    return BEGIN_MARKERS["doc_summ"] + "\n" + " ".join(parts)


def _direct_question(system: str, user: str) -> str:
    question = _between(user, "\nQuestion:", "\nAnswer:")
    answer = _after(user, "\nAnswer:")
    n_words = _int_after(system + user, r"around (\d+) words", 80)
    parts = [f"The answer is {answer}."]
    i = 0
    stem = normalize_ws(question.rstrip("?"))
    while count_words(" ".join(parts)) < n_words:
        lead = _DIRECT_LEADS[i % len(_DIRECT_LEADS)]
        parts.append(f"{lead}this concerns {stem}.")
        i += 1
    return BEGIN_MARKERS["question_gen"] + "\n" + " ".join(parts)


# ---------------------------------------------------------------------------
# Student rules
# ---------------------------------------------------------------------------


def _student(system: str, user: str, seed: int) -> str:
    if "Summarize the dialogue below" in system:
        dialogue = _after(user, "Dialogue:")
        turns = [line for line in dialogue.split("\n") if TURN_RE.match(line)]
        return _first_sentence(_utterance(turns[0])) if turns else _first_sentence(dialogue)
    if "Summarize the document below" in system:
        return _first_sentence(_after(user, "Document:"))
    if "Write the question that the paragraph below answers" in system:
        answer = _after(user, "Answer span:")
        return f"What is {answer}?"
    for task, marker in BEGIN_MARKERS.items():
        if marker in system:
            return _invert(task, system, user, seed)
    raise MockError("student mock has no rule for this prompt")


def _parse_ir_text(task: str, text: str) -> IRDocument:
    last_error: Exception | None = None
    for variant in ir_schema.VARIANTS:
        try:
            return ir_schema.parse_ir(text, task, variant, origin="from_target")
        except (ir_schema.ParseError, ir_schema.ValidationError) as exc:
            last_error = exc
    raise MockError(f"student mock could not parse the IR: {last_error}")


def _invert(task: str, system: str, user: str, seed: int) -> str:
    doc = _parse_ir_text(task, user)
    marker = BEGIN_MARKERS[task]
    if task == "dialogue_summ":
        segments = doc.payload.segments
        m = _int_after(system, r"about (\d+) turns", 2 * len(segments))
        per_segment = max(2, min(5, round(m / len(segments))))
        names = _SPEAKER_PAIRS[seed % len(_SPEAKER_PAIRS)]
        offset = seed % len(_FILLERS)
        lines = []
        turn = 0
        for seg in segments:
            lines.append(f"{names[turn % 2]}: {seg.summary}")
            turn += 1
            for j in range(per_segment - 1):
                lines.append(f"{names[turn % 2]}: {_FILLERS[(offset + j) % len(_FILLERS)]}")
                turn += 1
        return marker + "\n" + "\n".join(lines)
    if task == "doc_summ":
        connective = _CONNECTIVES[seed % len(_CONNECTIVES)]
        paragraphs = []
        for i, sec in enumerate(doc.payload.sections):
            lead = connective if i > 0 else ""
            paragraphs.append(f"{lead}{sec.summary}")
        return marker + "\n" + "\n\n".join(paragraphs)
    payload = doc.payload
    connective = _CONNECTIVES[seed % len(_CONNECTIVES)]
    sentences = [payload.masked_sentence.replace("[BLANK]", payload.answer, 1)]
    for i, bullet in enumerate(payload.bullets):
        sentences.append(f"{connective if i % 2 else ''}{bullet}")
    return marker + "\n" + " ".join(sentences)


# ---------------------------------------------------------------------------
# Judge / ranker rules
# ---------------------------------------------------------------------------


def _split_pair(user: str) -> tuple[str, str]:
    candidate = _between(user, "Candidate source:", "\nTarget:")
    target = _after(user, "\nTarget:")
    return candidate, target


def _judge(system: str, user: str) -> str:
    if "Evaluation form (score only)" in user:
        return "3"
    candidate, target = _split_pair(user)
    shared = content_words(candidate) & content_words(target)
    verdict = "CONSISTENT" if shared else "INCONSISTENT"
    return f"The texts share {len(shared)} content word(s) of length >= 5.\n{verdict}"


def _ranker(user: str) -> str:
    candidate, target = _split_pair(user)
    shared = content_words(candidate) & content_words(target)
    return f"Scored by content-word overlap.\n{len(shared)}"
