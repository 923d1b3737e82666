from __future__ import annotations

import random

import pytest

from irpair.gateway import EndpointProfile
from irpair.metrics import (
    CostLedger,
    MetricsError,
    RougeScore,
    UsageEntry,
    corpus_report,
    cost_report,
    lcs_length,
    parse_numeric_reply,
    rouge_l,
    rouge_n,
    rubric_eval,
    tokenize_for_rouge,
)
from irpair import mocks


# -- independent oracles -----------------------------------------------------


def subsequence_set(seq: tuple) -> set:
    subs = {()}
    for token in seq:
        subs |= {s + (token,) for s in subs}
    return subs


def lcs_brute_force(a: list, b: list) -> int:
    """LCS by enumerating all common subsequences (exponential, tiny inputs)."""
    common = subsequence_set(tuple(a)) & subsequence_set(tuple(b))
    return max(len(s) for s in common)


def clipped_ngram_counts(cand: list, ref: list, n: int) -> tuple[int, int, int]:
    def grams(tokens):
        return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]

    cand_grams, ref_grams = grams(cand), grams(ref)
    budget: dict = {}
    for gram in ref_grams:
        budget[gram] = budget.get(gram, 0) + 1
    overlap = 0
    for gram in cand_grams:
        if budget.get(gram, 0) > 0:
            overlap += 1
            budget[gram] -= 1
    return overlap, len(cand_grams), len(ref_grams)


# -- tokenizer ----------------------------------------------------------------


def test_tokenizer_rules():
    assert tokenize_for_rouge("The cat, sat!") == ["the", "cat", "sat"]
    assert tokenize_for_rouge("") == []
    assert tokenize_for_rouge("IT's 3-fold") == ["it", "s", "3", "fold"]


# -- rouge-n -------------------------------------------------------------------


def test_rouge_n_identity():
    score = rouge_n("a b c", "a b c", 2)
    assert score == RougeScore(1.0, 1.0, 1.0)


def test_rouge_n_half_overlap():
    # bigrams {ab, bc} vs {ab, bd}: clipped overlap 1 of 2 on each side
    score = rouge_n("a b c", "a b d", 2)
    assert score == RougeScore(0.5, 0.5, 0.5)


def test_rouge_n_empty_candidate():
    assert rouge_n("", "a b c", 2) == RougeScore(0.0, 0.0, 0.0)


def test_rouge_n_clipping_counts_duplicates_once():
    # candidate repeats "a" 4 times; reference has it twice -> clipped to 2
    score = rouge_n("a a a a", "a a b", 1)
    assert score.precision == pytest.approx(2 / 4)
    assert score.recall == pytest.approx(2 / 3)


def test_rouge_n_rejects_bad_n():
    with pytest.raises(MetricsError):
        rouge_n("a", "a", 0)


def test_rouge_n_matches_enumeration_oracle_on_random_pairs():
    rng = random.Random(99)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(100):
        cand = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        ref = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        for n in (1, 2, 3):
            overlap, n_cand, n_ref = clipped_ngram_counts(cand, ref, n)
            expected_p = overlap / n_cand if n_cand else 0.0
            expected_r = overlap / n_ref if n_ref else 0.0
            got = rouge_n(" ".join(cand), " ".join(ref), n)
            assert got.precision == pytest.approx(expected_p, abs=1e-12)
            assert got.recall == pytest.approx(expected_r, abs=1e-12)


# -- rouge-l -------------------------------------------------------------------


def test_rouge_l_identity():
    assert rouge_l("a b c d", "a b c d") == RougeScore(1.0, 1.0, 1.0)


def test_rouge_l_known_example():
    score = rouge_l("police kill the gunman", "police killed the gunman")
    assert score.precision == pytest.approx(0.75)
    assert score.recall == pytest.approx(0.75)
    assert score.f1 == pytest.approx(0.75)


def test_rouge_l_swap_exchanges_precision_and_recall():
    a, b = "a b c d e", "a c e f"
    fwd, rev = rouge_l(a, b), rouge_l(b, a)
    assert fwd.precision == rev.recall and fwd.recall == rev.precision
    assert fwd.f1 == pytest.approx(rev.f1)


def test_rouge_l_f1_bounded_by_max_component():
    rng = random.Random(5)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(200):
        cand = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 10)))
        ref = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 10)))
        score = rouge_l(cand, ref)
        assert score.f1 <= max(score.precision, score.recall) + 1e-12
        assert (score.f1 == 0.0) == (score.precision * score.recall == 0.0)


def test_lcs_dp_equals_brute_force():
    rng = random.Random(7)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(300):
        a = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        b = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        assert lcs_length(a, b) == lcs_brute_force(a, b)


def test_rouge_l_recall_weighted_beta_knob():
    score = rouge_l("a b", "a b c d", beta=3.0)
    # with large beta the F-measure leans toward recall
    assert abs(score.f1 - score.recall) < abs(score.f1 - score.precision)


# -- corpus report --------------------------------------------------------------


def test_corpus_report_single_example():
    report = corpus_report([("1", "a b c")], [("1", "a b c")])
    assert report.rouge2_f1 == 100.0 and report.rougeL_f1 == 100.0


def test_corpus_report_mean_is_arithmetic():
    # identical pair scores 1.0; disjoint pair scores 0.0 -> mean 50.0
    preds = [("1", "a b c"), ("2", "x y z")]
    refs = [("1", "a b c"), ("2", "p q r")]
    report = corpus_report(preds, refs)
    assert report.rougeL_f1 == 50.0


def test_corpus_report_misaligned_ids():
    with pytest.raises(MetricsError, match="'2'.*'3'"):
        corpus_report([("1", "a"), ("2", "b")], [("1", "a"), ("3", "b")])


def test_corpus_report_length_stats():
    report = corpus_report([("1", "one two three")], [("1", "one two")])
    assert report.mean_prediction_words == 3.0
    assert report.mean_reference_words == 2.0


# -- rubric eval -----------------------------------------------------------------


def _judge(base_url):
    return EndpointProfile(name="judge", base_url=base_url, model_id="m", role="judge")


def test_rubric_constant_judge():
    score = rubric_eval("pred", "src", _judge("mock://constant?text=4"), runs=1)
    assert (score.coherence, score.consistency, score.relevance, score.fluency) == (4.0,) * 4
    assert score.average == 4.0


def test_rubric_alternating_judge_mean():
    mocks.reset_cycles()
    score = rubric_eval(
        "pred", "src", _judge("mock://cycle?texts=3|4"), runs=20, dimensions=("coherence",)
    )
    assert score.coherence == pytest.approx(3.5)


def test_rubric_drops_unparseable_replies():
    mocks.reset_cycles()
    warnings = []
    score = rubric_eval(
        "pred",
        "src",
        _judge("mock://cycle?texts=great!|4"),
        runs=2,
        dimensions=("relevance",),
        warn=warnings.append,
    )
    assert score.relevance == 4.0
    assert warnings


def test_rubric_all_unparseable_is_error():
    with pytest.raises(MetricsError, match="coherence"):
        rubric_eval("pred", "src", _judge("mock://constant?text=great!"), runs=2)


def test_rubric_average_order_invariant():
    mocks.reset_cycles()
    a = rubric_eval("pred", "src", _judge("mock://cycle?texts=2|4"), runs=4, dimensions=("coherence",))
    mocks.reset_cycles()
    b = rubric_eval("pred", "src", _judge("mock://cycle?texts=4|2"), runs=4, dimensions=("coherence",))
    assert a.coherence == b.coherence


def test_parse_numeric_reply():
    assert parse_numeric_reply("Score:\n4") == 4.0
    assert parse_numeric_reply("I rate it 3.5 overall") == 3.5
    assert parse_numeric_reply("great!") is None


# -- cost ledger ------------------------------------------------------------------


def _ledger_minutes(stage_minutes: dict[str, float]) -> CostLedger:
    return CostLedger(
        [
            UsageEntry(stage, "teacher", 0, 0, minutes * 60.0)
            for stage, minutes in stage_minutes.items()
        ]
    )


def test_cost_report_reproduces_published_arithmetic():
    # IR-level annotation: 83 minutes (22 extraction + 61 annotation)
    # against 224 minutes of direct full-text synthesis
    pipeline_costs = _ledger_minutes({"extract": 22, "annotate": 61})
    direct = _ledger_minutes({"direct": 224})
    report = cost_report(pipeline_costs, direct)
    comp = report.comparisons["minutes"]
    assert comp.total == pytest.approx(83.0)
    assert comp.relative_cost == pytest.approx(0.37, abs=0.005)
    assert comp.saving == pytest.approx(141.0)


def test_cost_report_stage_split_sums():
    pipeline_costs = _ledger_minutes({"extract": 22, "annotate": 61})
    report = cost_report(pipeline_costs)
    assert report.per_stage["extract"]["minutes"] == pytest.approx(22.0)
    assert report.per_stage["annotate"]["minutes"] == pytest.approx(61.0)
    assert report.teacher_totals["minutes"] == pytest.approx(83.0)


def test_cost_report_without_baseline_omits_relative():
    report = cost_report(_ledger_minutes({"extract": 10}))
    comp = report.comparisons["minutes"]
    assert comp.baseline_total is None and comp.relative_cost is None


def test_cost_report_zero_baseline_undefined():
    pipeline_costs = _ledger_minutes({"extract": 10})
    empty_baseline = CostLedger([UsageEntry("direct", "teacher", 0, 0, 0.0)])
    comp = cost_report(pipeline_costs, empty_baseline).comparisons["minutes"]
    assert comp.relative_cost is None
    assert "undefined" in cost_report(pipeline_costs, empty_baseline).format_table()


def test_cost_report_requires_entries():
    with pytest.raises(MetricsError):
        cost_report(CostLedger())


def test_ledger_round_trips_through_file(tmp_path):
    ledger = CostLedger([UsageEntry("extract", "teacher", 10, 5, 1.5)])
    path = tmp_path / "ledger.jsonl"
    ledger.append_to(path)
    back = CostLedger.load(path)
    assert back.entries == ledger.entries


def test_ledger_units_never_converted():
    ledger = CostLedger([UsageEntry("extract", "teacher", 100, 50, 120.0)])
    assert ledger.total("completion_tokens", role="teacher") == 50
    assert ledger.total("tokens", role="teacher") == 150
    assert ledger.total("minutes", role="teacher") == pytest.approx(2.0)
    with pytest.raises(MetricsError):
        ledger.total("hours")
