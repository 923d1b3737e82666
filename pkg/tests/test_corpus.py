from __future__ import annotations

import json
import random

import pytest

from irpair import toydata
from irpair.corpus import (
    CorpusError,
    CorpusRecord,
    count_turns,
    count_words,
    load_pairs,
    load_records,
    sample_shots,
    split_unpaired,
    write_records,
)


def _write_lines(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def test_load_records_preserves_order_and_ids(tmp_path):
    rows = [
        {"id": "a", "text": "First text."},
        {"id": "b", "text": "Second text."},
        {"id": "c", "text": "Third text."},
    ]
    path = _write_lines(tmp_path / "c.jsonl", rows)
    records = load_records(path, "doc_summ", "source")
    assert [r.id for r in records] == ["a", "b", "c"]
    assert all(r.task == "doc_summ" and r.role == "source" for r in records)


def test_load_records_synthesizes_ids(tmp_path):
    path = _write_lines(tmp_path / "c.jsonl", [{"text": "Hello there."}])
    records = load_records(path, "doc_summ", "source")
    assert records[0].id == "c.jsonl#1"


def test_load_records_empty_text_names_line(tmp_path):
    rows = [{"id": "a", "text": "ok"}, {"id": "b", "text": "   "}]
    path = _write_lines(tmp_path / "c.jsonl", rows)
    with pytest.raises(CorpusError, match="line 2: empty text"):
        load_records(path, "doc_summ", "source")


def test_load_records_duplicate_id_lists_both_lines(tmp_path):
    rows = [{"id": "a", "text": "x y"}, {"id": "a", "text": "z w"}]
    path = _write_lines(tmp_path / "c.jsonl", rows)
    with pytest.raises(CorpusError, match="lines 1 and 2"):
        load_records(path, "doc_summ", "source")


def test_load_records_invalid_json_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "ok"}\nnot json\n', encoding="utf-8")
    with pytest.raises(CorpusError, match="line 2"):
        load_records(path, "doc_summ", "source")


def test_answer_span_must_occur_verbatim(tmp_path):
    rows = [
        {"id": "good", "text": "The museum opened.", "answer_span": "museum"},
        {"id": "bad", "text": "The museum opened.", "answer_span": "stadium"},
    ]
    path = _write_lines(tmp_path / "c.jsonl", rows)
    with pytest.raises(CorpusError, match="'bad'"):
        load_records(path, "question_gen", "source")


def test_answer_span_not_required_in_target_text(tmp_path):
    rows = [{"id": "t", "text": "Where is it?", "answer_span": "the museum"}]
    path = _write_lines(tmp_path / "c.jsonl", rows)
    assert load_records(path, "question_gen", "target")[0].answer_span == "the museum"


def test_nfc_normalization_applied(tmp_path):
    decomposed = "Café tonight."
    path = _write_lines(tmp_path / "c.jsonl", [{"id": "a", "text": decomposed}])
    rec = load_records(path, "doc_summ", "source")[0]
    assert rec.text == "Café tonight."


def test_role_conflict_rejected(tmp_path):
    path = _write_lines(tmp_path / "c.jsonl", [{"id": "a", "role": "target", "text": "x y"}])
    with pytest.raises(CorpusError, match="role"):
        load_records(path, "doc_summ", "source")


def test_write_records_round_trips(tmp_path):
    pairs = toydata.generate_pairs("question_gen", 4, seed=1)
    records = [rec for pair in pairs for rec in pair]
    path = tmp_path / "out.jsonl"
    write_records(path, records)
    back = load_pairs(path, "question_gen")
    assert [(s.id, t.id) for s, t in back] == [(s.id, t.id) for s, t in pairs]
    assert all(s.text == s2.text for (s, _), (s2, _) in zip(pairs, back))


def _make_pairs(n):
    return [
        (
            CorpusRecord(id=f"p{i}-s", task="doc_summ", role="source", text=f"src {i}", pair_id=f"p{i}"),
            CorpusRecord(id=f"p{i}-t", task="doc_summ", role="target", text=f"tgt {i}", pair_id=f"p{i}"),
        )
        for i in range(n)
    ]


def test_split_sizes_and_disjointness():
    split = split_unpaired(_make_pairs(100), 0.2, seed=7)
    assert len(split.source_set) == 20
    assert len(split.target_set) == 80
    src_ids = {r.origin_pair_id for r in split.source_set}
    tgt_ids = {r.origin_pair_id for r in split.target_set}
    assert not src_ids & tgt_ids
    assert all(r.role == "source" for r in split.source_set)
    assert all(r.role == "target" for r in split.target_set)


def test_split_is_deterministic():
    pairs = _make_pairs(60)
    a = split_unpaired(pairs, 0.35, seed=11)
    b = split_unpaired(pairs, 0.35, seed=11)
    assert a == b


def test_split_rejects_bad_fraction():
    for fraction in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(CorpusError):
            split_unpaired(_make_pairs(10), fraction, seed=1)


def test_split_rejects_empty_corpus():
    with pytest.raises(CorpusError):
        split_unpaired([], 0.5, seed=1)


def test_paper_scale_split_200_shots_1000_targets():
    # the small-scale document setup: 200 source shots and 1,000 targets,
    # drawn from disjoint original examples
    pairs = _make_pairs(1250)
    split = split_unpaired(pairs, 0.2, seed=5)
    assert len(split.source_set) == 250
    shots = sample_shots(list(split.source_set), 200, seed=5)
    targets = sample_shots(list(split.target_set), 1000, seed=6)
    assert len(shots) == 200 and len(targets) == 1000
    assert not {r.origin_pair_id for r in shots} & {r.origin_pair_id for r in targets}


def test_sample_shots_full_set_sorted_by_id():
    records = [
        CorpusRecord(id=f"r{i:02d}", task="doc_summ", role="source", text="x y")
        for i in (3, 1, 2)
    ]
    assert [r.id for r in sample_shots(records, 3, seed=0)] == ["r01", "r02", "r03"]


def test_sample_shots_zero_and_overdraw():
    records = [CorpusRecord(id="a", task="doc_summ", role="source", text="x")]
    assert sample_shots(records, 0, seed=1) == []
    with pytest.raises(CorpusError, match="2 shots from 1"):
        sample_shots(records, 2, seed=1)


def test_sample_shots_deterministic_at_scale():
    rng = random.Random(0)
    records = [
        CorpusRecord(id=f"d{i:05d}", task="dialogue_summ", role="source", text=f"t {rng.random()}")
        for i in range(12400)
    ]
    a = sample_shots(records, 124, seed=1)
    b = sample_shots(records, 124, seed=1)
    assert len(a) == 124 and a == b


def test_turn_and_word_counting():
    text = "Ana: Hello there.\nBen: Hi.\nThis line has no speaker tag."
    assert count_turns(text) == 2
    assert count_words("one two  three\nfour") == 4
