"""Reference-based metrics, judge-rubric evaluation, and the cost ledger.

ROUGE preprocessing: lowercase, split on any non-alphanumeric run, no
stemming. ROUGE-L uses the whole-text LCS (no summary-level union) and a
plain harmonic-mean F-measure by default (``beta`` is a knob). Corpus scores
are arithmetic means of per-example F1, reported x100 to one decimal.

The cost ledger records one entry per gateway call ``{stage, role,
prompt_tokens, completion_tokens, wall_time}``; reports never convert
between token and minute units, they state both.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import gateway, prompts

_TOKEN_RE = re.compile(r"[a-z0-9]+")

RUBRIC_RANGES = {
    "coherence": (1.0, 5.0),
    "consistency": (1.0, 5.0),
    "relevance": (1.0, 5.0),
    "fluency": (1.0, 5.0),
}

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def tokenize_for_rouge(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _f_measure(precision: float, recall: float, beta: float) -> float:
    if precision + recall == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (recall + b2 * precision)


def rouge_n(candidate: str, reference: str, n: int, beta: float = 1.0) -> RougeScore:
    """Clipped n-gram overlap F-measure."""
    if n < 1:
        raise MetricsError(f"n must be >= 1, got {n}")
    cand = tokenize_for_rouge(candidate)
    ref = tokenize_for_rouge(reference)
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    total_cand = sum(cand_grams.values())
    total_ref = sum(ref_grams.values())
    precision = overlap / total_cand if total_cand else 0.0
    recall = overlap / total_ref if total_ref else 0.0
    return RougeScore(precision, recall, _f_measure(precision, recall, beta))


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length via dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ai in a:
        curr = [0] * (len(b) + 1)
        for j, bj in enumerate(b, start=1):
            if ai == bj:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, reference: str, beta: float = 1.0) -> RougeScore:
    """LCS-based F-measure over the whole texts."""
    cand = tokenize_for_rouge(candidate)
    ref = tokenize_for_rouge(reference)
    lcs = lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref) if ref else 0.0
    return RougeScore(precision, recall, _f_measure(precision, recall, beta))


@dataclass(frozen=True)
class CorpusReport:
    count: int
    rouge2_f1: float  # x100, one decimal
    rougeL_f1: float  # x100, one decimal
    mean_prediction_words: float
    mean_reference_words: float

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "rouge2_f1": self.rouge2_f1,
            "rougeL_f1": self.rougeL_f1,
            "mean_prediction_words": self.mean_prediction_words,
            "mean_reference_words": self.mean_reference_words,
        }

    def format_table(self) -> str:
        return "\n".join(
            [
                f"examples            {self.count}",
                f"ROUGE-2 (F1 x100)   {self.rouge2_f1:.1f}",
                f"ROUGE-L (F1 x100)   {self.rougeL_f1:.1f}",
                f"mean pred words     {self.mean_prediction_words:.1f}",
                f"mean ref words      {self.mean_reference_words:.1f}",
            ]
        )


def corpus_report(
    predictions: list[tuple[str, str]], references: list[tuple[str, str]], beta: float = 1.0
) -> CorpusReport:
    """Aggregate ROUGE over (id, text) lists aligned by id."""
    if len(predictions) != len(references):
        raise MetricsError(
            f"got {len(predictions)} predictions for {len(references)} references"
        )
    if not predictions:
        raise MetricsError("cannot report on an empty corpus")
    for (pid, _), (rid, _) in zip(predictions, references):
        if pid != rid:
            raise MetricsError(f"misaligned ids: prediction {pid!r} vs reference {rid!r}")
    r2 = [rouge_n(p, r, 2, beta).f1 for (_, p), (_, r) in zip(predictions, references)]
    rl = [rouge_l(p, r, beta).f1 for (_, p), (_, r) in zip(predictions, references)]
    n = len(predictions)
    return CorpusReport(
        count=n,
        rouge2_f1=round(100 * sum(r2) / n, 1),
        rougeL_f1=round(100 * sum(rl) / n, 1),
        mean_prediction_words=round(sum(len(p.split()) for _, p in predictions) / n, 2),
        mean_reference_words=round(sum(len(r.split()) for _, r in references) / n, 2),
    )


# ---------------------------------------------------------------------------
# Rubric (judge-based) evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RubricScore:
    coherence: float
    consistency: float
    relevance: float
    fluency: float
    average: float

    def to_json(self) -> dict:
        return {
            "coherence": self.coherence,
            "consistency": self.consistency,
            "relevance": self.relevance,
            "fluency": self.fluency,
            "average": self.average,
        }


def parse_numeric_reply(text: str) -> float | None:
    """Extract the score from a constrained numeric reply (last number wins)."""
    matches = _NUMBER_RE.findall(text)
    return float(matches[-1]) if matches else None


def rubric_eval(
    prediction: str,
    source: str,
    judge: gateway.EndpointProfile,
    runs: int = 1,
    dimensions: Iterable[str] = prompts.RUBRIC_DIMENSIONS,
    complete_fn: Callable = gateway.complete,
    warn: Callable[[str], None] | None = None,
) -> RubricScore:
    """Score one prediction on each rubric dimension, averaged over ``runs``.

    Unparseable or out-of-range replies are dropped from the average (and
    reported through ``warn``); a dimension with no usable reply is an error.
    Scores are judge-relative: absolute values depend on the judge model.
    """
    if runs < 1:
        raise MetricsError(f"runs must be >= 1, got {runs}")
    means: dict[str, float] = {}
    for dim in dimensions:
        lo, hi = RUBRIC_RANGES[dim]
        messages = prompts.render_rubric_prompt(dim, prediction, source)
        values = []
        for i in range(runs):
            result = complete_fn(judge, messages, {"seed": i} if runs > 1 else None)
            score = parse_numeric_reply(result.text)
            if score is None or not lo <= score <= hi:
                if warn:
                    warn(f"dropped unusable {dim} reply: {result.text[:80]!r}")
                continue
            values.append(score)
        if not values:
            raise MetricsError(f"no parseable judge reply for dimension {dim!r}")
        means[dim] = sum(values) / len(values)
    average = sum(means.values()) / len(means)
    return RubricScore(
        coherence=means.get("coherence", 0.0),
        consistency=means.get("consistency", 0.0),
        relevance=means.get("relevance", 0.0),
        fluency=means.get("fluency", 0.0),
        average=average,
    )


# ---------------------------------------------------------------------------
# Teacher-cost ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UsageEntry:
    stage: str
    role: str
    prompt_tokens: int
    completion_tokens: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "role": self.role,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "wall_time": self.wall_time,
        }


@dataclass
class CostLedger:
    entries: list[UsageEntry] = field(default_factory=list)

    def record(self, stage: str, role: str, usage: gateway.GenerationUsage) -> None:
        self.entries.append(
            UsageEntry(stage, role, usage.prompt_tokens, usage.completion_tokens, usage.wall_time)
        )

    def append_to(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as handle:
            for entry in self.entries:
                handle.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CostLedger":
        ledger = cls()
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                ledger.entries.append(
                    UsageEntry(
                        stage=obj["stage"],
                        role=obj["role"],
                        prompt_tokens=int(obj["prompt_tokens"]),
                        completion_tokens=int(obj["completion_tokens"]),
                        wall_time=float(obj["wall_time"]),
                    )
                )
        return ledger

    def total(self, unit: str, role: str | None = None, stages: set[str] | None = None) -> float:
        value = 0.0
        for entry in self.entries:
            if role is not None and entry.role != role:
                continue
            if stages is not None and entry.stage not in stages:
                continue
            if unit == "minutes":
                value += entry.wall_time / 60.0
            elif unit == "completion_tokens":
                value += entry.completion_tokens
            elif unit == "tokens":
                value += entry.prompt_tokens + entry.completion_tokens
            else:
                raise MetricsError(f"unknown unit {unit!r}")
        return value

    def stage_names(self) -> list[str]:
        seen: list[str] = []
        for entry in self.entries:
            if entry.stage not in seen:
                seen.append(entry.stage)
        return seen


COST_UNITS = ("completion_tokens", "tokens", "minutes")


@dataclass(frozen=True)
class CostComparison:
    unit: str
    total: float
    baseline_total: float | None
    relative_cost: float | None  # None when the baseline total is zero/absent
    saving: float | None


@dataclass(frozen=True)
class CostReport:
    per_stage: dict[str, dict[str, float]]
    teacher_totals: dict[str, float]
    comparisons: dict[str, CostComparison]

    def to_json(self) -> dict:
        return {
            "per_stage": self.per_stage,
            "teacher_totals": self.teacher_totals,
            "comparisons": {
                unit: {
                    "total": comp.total,
                    "baseline_total": comp.baseline_total,
                    "relative_cost": comp.relative_cost,
                    "saving": comp.saving,
                }
                for unit, comp in self.comparisons.items()
            },
        }

    def format_table(self) -> str:
        lines = ["teacher-side cost per stage"]
        for stage, units in self.per_stage.items():
            lines.append(
                f"  {stage:<16} completion_tokens={units['completion_tokens']:.0f}"
                f" tokens={units['tokens']:.0f} minutes={units['minutes']:.2f}"
            )
        for unit, comp in self.comparisons.items():
            if comp.baseline_total is None:
                lines.append(f"{unit}: total {comp.total:.2f} (no baseline)")
            elif comp.relative_cost is None:
                lines.append(
                    f"{unit}: total {comp.total:.2f}, baseline 0 (relative cost undefined)"
                )
            else:
                lines.append(
                    f"{unit}: total {comp.total:.2f}, baseline {comp.baseline_total:.2f},"
                    f" relative cost {comp.relative_cost:.2f}x, saving {comp.saving:.2f}"
                )
        return "\n".join(lines)


def cost_report(ledger: CostLedger, baseline: CostLedger | None = None) -> CostReport:
    """Teacher-side cost totals, optionally compared against a baseline ledger.

    Relative cost = this ledger's teacher-side total over the baseline's, per
    unit; units are never converted into each other. A zero baseline total
    leaves that unit's relative cost undefined.
    """
    if not ledger.entries:
        raise MetricsError("cost report requires a non-empty ledger")
    per_stage: dict[str, dict[str, float]] = {}
    for stage in ledger.stage_names():
        per_stage[stage] = {
            unit: ledger.total(unit, role="teacher", stages={stage}) for unit in COST_UNITS
        }
    teacher_totals = {unit: ledger.total(unit, role="teacher") for unit in COST_UNITS}
    comparisons: dict[str, CostComparison] = {}
    for unit in COST_UNITS:
        total = teacher_totals[unit]
        if baseline is None:
            comparisons[unit] = CostComparison(unit, total, None, None, None)
            continue
        baseline_total = baseline.total(unit, role="teacher")
        relative = total / baseline_total if baseline_total > 0 else None
        saving = baseline_total - total
        comparisons[unit] = CostComparison(unit, total, baseline_total, relative, saving)
    return CostReport(per_stage=per_stage, teacher_totals=teacher_totals, comparisons=comparisons)
