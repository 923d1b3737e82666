"""Best-of-n candidate generation, consistency judging, and ranked selection.

For each annotated target the student samples ``n`` candidate sources, a
judge drops pairs it deems inconsistent, and a ranker scores the survivors;
the top-scoring consistent candidate wins (ties go to the lowest index).
When every candidate is judged inconsistent the set falls back to the
highest-scoring candidate overall and the pair is flagged, preserving the
one-pair-per-target conservation property; flagged pairs can be filtered
downstream.

With ``n=1`` and no judging the output reduces to plain synthesis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import gateway, prompts
from .metrics import CostLedger, parse_numeric_reply
from .pipeline import Annotation, Provenance, SyntheticPair
from .prompts import LengthTargets
from .storage import write_json, write_jsonl

logger = logging.getLogger(__name__)


class SelectorError(RuntimeError):
    pass


@dataclass(frozen=True)
class Candidate:
    index: int
    synthetic_source: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class Judgment:
    index: int
    consistent: bool
    rationale: str
    parse_ok: bool = True


@dataclass(frozen=True)
class RankScore:
    index: int
    score: float


@dataclass
class CandidateSet:
    target_id: str
    annotation: Annotation
    candidates: list[Candidate] = field(default_factory=list)
    judgments: list[Judgment] = field(default_factory=list)
    scores: list[RankScore] = field(default_factory=list)
    teacher_name: str = "teacher"
    student_name: str = "student"

    def to_json(self) -> dict:
        return {
            "target_id": self.target_id,
            "annotation": self.annotation.to_json(),
            "candidates": [
                {
                    "index": c.index,
                    "synthetic_source": c.synthetic_source,
                    "prompt_tokens": c.prompt_tokens,
                    "completion_tokens": c.completion_tokens,
                }
                for c in self.candidates
            ],
            "judgments": [
                {
                    "index": j.index,
                    "consistent": j.consistent,
                    "rationale": j.rationale,
                    "parse_ok": j.parse_ok,
                }
                for j in self.judgments
            ],
            "scores": [{"index": s.index, "score": s.score} for s in self.scores],
            "teacher_name": self.teacher_name,
            "student_name": self.student_name,
        }


def generate_candidates(
    annotation: Annotation,
    student: gateway.EndpointProfile,
    task: str,
    length_targets: LengthTargets,
    n: int,
    temperature: float = 0.7,
    teacher_name: str = "teacher",
    parallelism: int = 1,
    ledger: CostLedger | None = None,
) -> CandidateSet:
    """Sample ``n`` independent sources for one IR (seeds 0..n-1)."""
    if n < 1:
        raise SelectorError(f"n must be >= 1, got {n}")
    if n > 1 and temperature <= 0:
        raise SelectorError("best-of-n sampling needs temperature > 0, or candidates are identical")
    messages = prompts.render_synthesis_prompt(task, annotation.ir, length_targets)
    overrides = [{"seed": k, "temperature": temperature} for k in range(n)]
    results = gateway.complete_batch(student, [messages] * n, parallelism, overrides)
    cset = CandidateSet(
        target_id=annotation.target.id,
        annotation=annotation,
        teacher_name=teacher_name,
        student_name=student.name,
    )
    for k, result in enumerate(results):
        if isinstance(result, gateway.GatewayError):
            logger.warning("candidate %d for %s failed: %s", k, annotation.target.id, result)
            continue
        if ledger is not None:
            ledger.record("select", student.role, result.usage)
        try:
            extraction = prompts.extract_generation(result.text, task)
        except prompts.ExtractionError:
            continue
        cset.candidates.append(
            Candidate(
                index=k,
                synthetic_source=extraction.text,
                prompt_tokens=result.usage.prompt_tokens,
                completion_tokens=result.usage.completion_tokens,
            )
        )
    if not cset.candidates:
        raise SelectorError(f"all {n} candidates empty for target {annotation.target.id!r}")
    return cset


def parse_verdict(reply: str) -> tuple[bool, bool]:
    """(consistent, parse_ok) from a constrained judge reply's final line."""
    lines = [line.strip() for line in reply.strip().split("\n") if line.strip()]
    token = lines[-1].strip(" .!").upper() if lines else ""
    if token == "CONSISTENT":
        return True, True
    if token == "INCONSISTENT":
        return False, True
    return False, False


def judge_consistency(
    candidate_text: str,
    target_text: str,
    judge: gateway.EndpointProfile,
    task: str,
    ledger: CostLedger | None = None,
) -> tuple[bool, str, bool]:
    """Binary verdict for one candidate; unparseable verdicts count as inconsistent."""
    messages = prompts.render_consistency_prompt(task, candidate_text, target_text)
    result = gateway.complete(judge, messages)
    if ledger is not None:
        ledger.record("select", judge.role, result.usage)
    consistent, parse_ok = parse_verdict(result.text)
    if not parse_ok:
        logger.warning("unparseable judge verdict: %r", result.text[:80])
    return consistent, result.text, parse_ok


def judge_candidates(
    cset: CandidateSet,
    judge: gateway.EndpointProfile,
    task: str,
    ledger: CostLedger | None = None,
) -> CandidateSet:
    cset.judgments = []
    for cand in cset.candidates:
        consistent, rationale, parse_ok = judge_consistency(
            cand.synthetic_source, cset.annotation.target.text, judge, task, ledger=ledger
        )
        cset.judgments.append(Judgment(cand.index, consistent, rationale, parse_ok))
    return cset


def rank_candidates(
    cset: CandidateSet,
    ranker: gateway.EndpointProfile,
    task: str,
    include_inconsistent: bool = False,
    ledger: CostLedger | None = None,
) -> CandidateSet:
    """Score candidates that passed judging (all of them on the fallback pass).

    A ranker failure leaves that candidate unscored and excluded from
    selection rather than failing the set.
    """
    consistent = {j.index for j in cset.judgments if j.consistent}
    if not include_inconsistent and not consistent:
        raise SelectorError("rank_candidates needs at least one consistent candidate")
    cset.scores = []
    for cand in cset.candidates:
        if not include_inconsistent and cand.index not in consistent:
            continue
        messages = prompts.render_ranker_prompt(
            task, cand.synthetic_source, cset.annotation.target.text
        )
        try:
            result = gateway.complete(ranker, messages)
        except gateway.GatewayError as exc:
            logger.warning("ranker failed on candidate %d: %s", cand.index, exc)
            continue
        if ledger is not None:
            ledger.record("select", ranker.role, result.usage)
        score = parse_numeric_reply(result.text)
        if score is None:
            logger.warning("unparseable ranker reply: %r", result.text[:80])
            continue
        cset.scores.append(RankScore(cand.index, score))
    return cset


def select_best(cset: CandidateSet) -> SyntheticPair:
    """Pick the max-score consistent candidate; ties resolve to the lowest index.

    Zero consistent candidates fall back to the best-scoring candidate
    regardless of consistency (flagged in provenance); zero scores fall back
    to the lowest surviving index.
    """
    if not cset.candidates:
        raise SelectorError("select_best on an empty candidate set")
    by_index = {c.index: c for c in cset.candidates}
    for ref in cset.judgments + cset.scores:
        if ref.index not in by_index:
            raise SelectorError(f"judgment/score references unknown candidate {ref.index}")
    consistent = {j.index for j in cset.judgments if j.consistent}
    scored = {s.index: s.score for s in cset.scores}

    eligible = [i for i in sorted(by_index) if i in consistent and i in scored]
    fallback = False
    if eligible:
        best = max(eligible, key=lambda i: (scored[i], -i))
        selected_by = "ranker"
    elif scored:
        fallback = True
        candidates_scored = [i for i in sorted(by_index) if i in scored]
        best = max(candidates_scored, key=lambda i: (scored[i], -i))
        selected_by = "ranker_fallback"
    else:
        fallback = True
        best = min(by_index)
        selected_by = "first_fallback"

    ann = cset.annotation
    return SyntheticPair(
        pair_id=ann.target.id,
        target=ann.target,
        ir=ann.ir,
        synthetic_source=by_index[best].synthetic_source,
        provenance=Provenance(
            teacher=cset.teacher_name,
            student=cset.student_name,
            candidate_index=best,
            selected_by=selected_by,
            fallback=fallback,
        ),
        pool=ann.pool,
    )


def run_best_of_n(
    annotations: list[Annotation],
    student: gateway.EndpointProfile,
    judge: gateway.EndpointProfile,
    ranker: gateway.EndpointProfile,
    task: str,
    length_targets: LengthTargets,
    n: int,
    temperature: float = 0.7,
    teacher_name: str = "teacher",
    parallelism: int = 1,
    ledger: CostLedger | None = None,
    out_dir: str | Path | None = None,
) -> tuple[list[SyntheticPair], list[dict]]:
    """Full best-of-n pass: generate, judge, rank, select, persist."""
    pairs: list[SyntheticPair] = []
    drops: list[dict] = []
    csets: list[CandidateSet] = []
    for ann in annotations:
        try:
            cset = generate_candidates(
                ann,
                student,
                task,
                length_targets,
                n,
                temperature=temperature,
                teacher_name=teacher_name,
                parallelism=parallelism,
                ledger=ledger,
            )
        except SelectorError as exc:
            drops.append({"record_id": ann.target.id, "reason": str(exc)})
            continue
        judge_candidates(cset, judge, task, ledger=ledger)
        any_consistent = any(j.consistent for j in cset.judgments)
        rank_candidates(cset, ranker, task, include_inconsistent=not any_consistent, ledger=ledger)
        csets.append(cset)
        pairs.append(select_best(cset))
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_jsonl(out_dir / "candidates.jsonl", [c.to_json() for c in csets])
        write_jsonl(out_dir / "pairs.jsonl", [p.to_json() for p in pairs])
        write_json(out_dir / "drops.json", {"dropped": drops})
    return pairs, drops
