from __future__ import annotations

import random

import pytest

from helpers import rand_ir
from irpair.ir import (
    TASKS,
    VARIANTS,
    Diagnostic,
    DialogueIR,
    DialogueSegment,
    DocumentIR,
    DocumentSection,
    IRDocument,
    ParseError,
    QuestionIR,
    ValidationError,
    is_valid,
    parse_ir,
    render_ir,
    split_sentences,
    validate_ir,
)


def test_parse_dialogue_two_segments():
    doc = parse_ir("Segment 1: A greets B.\nSegment 2: They plan lunch.", "dialogue_summ", "sectioned")
    assert isinstance(doc.payload, DialogueIR)
    assert [s.summary for s in doc.payload.segments] == ["A greets B.", "They plan lunch."]


def test_parse_skips_leading_prose():
    text = "Sure! Here is the segmentation you asked for:\n\nSegment 1: A greets B.\nSegment 2: Done."
    doc = parse_ir(text, "dialogue_summ", "sectioned")
    assert len(doc.payload.segments) == 2


def test_parse_ignores_trailing_prose():
    text = "Segment 1: A greets B.\nSegment 2: Done.\nI hope this helps!"
    doc = parse_ir(text, "dialogue_summ", "sectioned")
    assert len(doc.payload.segments) == 2


def test_parse_no_block_is_parse_error():
    with pytest.raises(ParseError):
        parse_ir("just some prose with no structure at all", "dialogue_summ", "sectioned")


def test_parse_noncontiguous_segments_rejected():
    with pytest.raises(ValidationError) as err:
        parse_ir("Segment 1: A.\nSegment 3: B.", "dialogue_summ", "sectioned")
    assert "segments.index" in err.value.field


def test_parse_double_blank_rejected():
    text = "The [BLANK] went to [BLANK].\n• Fact one.\n• Fact two.\n• Fact three.\nAnswer: x"
    with pytest.raises(ValidationError) as err:
        parse_ir(text, "question_gen", "sectioned")
    assert err.value.field == "masked_sentence"


def test_parse_two_bullets_rejected():
    text = "The [BLANK] arrived.\n• Fact one.\n• Fact two.\nAnswer: x"
    with pytest.raises(ValidationError) as err:
        parse_ir(text, "question_gen", "sectioned")
    assert err.value.field == "bullets.count"


def test_parse_question_uses_default_answer():
    text = "The [BLANK] arrived.\n• One fact.\n• Two facts.\n• Three facts."
    doc = parse_ir(text, "question_gen", "sectioned", default_answer="the train")
    assert doc.payload.answer == "the train"
    with pytest.raises(ValidationError):
        parse_ir(text, "question_gen", "sectioned")


def test_section_bound_hard_for_source_soft_for_target():
    blocks = "\n\n".join(f"Section {i}\nSummary: Sentence {i} here.\nEntities: " for i in (1, 2))
    with pytest.raises(ValidationError):
        parse_ir(blocks, "doc_summ", "sectioned", origin="from_source")
    doc = parse_ir(blocks, "doc_summ", "sectioned", origin="from_target")
    assert len(doc.payload.sections) == 2
    diags = validate_ir(doc)
    assert [d for d in diags if d.field == "sections.count" and d.severity == "warning"]
    assert is_valid(doc)


def test_render_document_keeps_empty_entities_line():
    doc = IRDocument(
        "doc_summ",
        "sectioned",
        DocumentIR(tuple(DocumentSection(i, f"Sentence {i} fine.", ()) for i in (1, 2, 3))),
    )
    text = render_ir(doc)
    assert "Entities: " in text.split("\n")
    assert text.count("\n\n") == 2  # one blank line between sections


def test_render_dialogue_sectioned_lines():
    doc = IRDocument(
        "dialogue_summ",
        "sectioned",
        DialogueIR((DialogueSegment(1, "A greets B."), DialogueSegment(2, "They plan lunch."))),
    )
    assert render_ir(doc) == "Segment 1: A greets B.\nSegment 2: They plan lunch."


def test_validate_eight_sections_from_source():
    doc = IRDocument(
        "doc_summ",
        "sectioned",
        DocumentIR(tuple(DocumentSection(i, "One sentence.", ()) for i in range(1, 9))),
    )
    diags = [d for d in validate_ir(doc) if d.field == "sections.count"]
    assert diags and diags[0].severity == "error"
    assert diags[0].observed == "8"


def test_validate_clean_question_ir_is_empty():
    doc = IRDocument(
        "question_gen",
        "sectioned",
        QuestionIR("It is [BLANK].", ("Fact one.", "Fact two.", "Fact three.", "Fact four."), "x"),
    )
    assert validate_ir(doc) == []


def test_validate_noncontiguous_indices():
    doc = IRDocument(
        "dialogue_summ",
        "sectioned",
        DialogueIR((DialogueSegment(1, "A."), DialogueSegment(3, "B."))),
    )
    assert any(d.field == "segments.index" for d in validate_ir(doc))


def test_validate_soundness_after_render():
    rng = random.Random(42)
    for _ in range(50):
        task = rng.choice(TASKS)
        variant = rng.choice(VARIANTS)
        doc = rand_ir(rng, task, variant)
        if validate_ir(doc):
            continue
        reparsed = parse_ir(render_ir(doc), task, variant, origin=doc.origin)
        assert validate_ir(reparsed) == []


@pytest.mark.parametrize("task", TASKS)
@pytest.mark.parametrize("variant", VARIANTS)
def test_round_trip_100_random_docs(task, variant):
    rng = random.Random(hash((task, variant)) & 0xFFFF)
    for _ in range(100):
        origin = rng.choice(("from_source", "from_target"))
        doc = rand_ir(rng, task, variant, origin)
        rendered = render_ir(doc)
        assert parse_ir(rendered, task, variant, origin=origin) == doc


def test_sentence_splitter_round_trips_join():
    text = "Dr. Smith arrived. He left early! Was that fine?"
    assert " ".join(split_sentences(text)) == text


def test_parse_handles_crlf():
    doc = parse_ir("Segment 1: A.\r\nSegment 2: B.", "dialogue_summ", "sectioned")
    assert len(doc.payload.segments) == 2


def test_diagnostics_name_field_rule_observed():
    doc = IRDocument(
        "question_gen", "sectioned", QuestionIR("No blank here.", ("a.", "b.", "c."), "x")
    )
    diag = [d for d in validate_ir(doc) if d.field == "masked_sentence"][0]
    assert isinstance(diag, Diagnostic)
    assert "[BLANK]" in diag.rule
    assert diag.observed == "0"
