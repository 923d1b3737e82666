"""Stage execution over a run directory: the glue between CLI and modules.

Each stage reads only the previous stage's persisted artifacts, writes its
own under ``runs/<run-id>/<stage>/`` (including its gateway usage slice),
and updates the manifest with checksums, so any stage can be re-run
independently and a run can resume after interruption.
"""

from __future__ import annotations

import logging
import random
import shutil
from pathlib import Path

from . import corpus, gateway, metrics, pipeline, prompts, selector
from .manifest import STAGES, ManifestError, RunManifest, endpoint_from_config
from .metrics import CostLedger
from .pipeline import (
    Annotation,
    ReconstructionExample,
    SyntheticPair,
    mean_length_targets,
    size_hint_for,
)
from .storage import read_jsonl, write_json, write_jsonl, write_text

logger = logging.getLogger(__name__)


class StageNotReady(RuntimeError):
    """A stage was requested before its prerequisites completed (exit 1)."""


class StageFailure(RuntimeError):
    """A stage started and failed (exit 2)."""


class Runner:
    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self.config = manifest.config

    # -- helpers -----------------------------------------------------------

    def endpoint(self, role: str):
        return endpoint_from_config(self.config, role)

    def _stage_dir(self, stage: str) -> Path:
        path = self.manifest.stage_dir(stage)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _write_usage(self, stage: str, ledger: CostLedger) -> Path:
        return write_jsonl(
            self._stage_dir(stage) / "usage.jsonl", [e.to_json() for e in ledger.entries]
        )

    def _load_shots(self) -> list[corpus.CorpusRecord]:
        return corpus.load_records(
            self.manifest.stage_dir("split") / "shots.jsonl", self.config["task"], "source"
        )

    def _load_examples(self) -> list[ReconstructionExample]:
        rows = read_jsonl(self.manifest.stage_dir("extract") / "recon_examples.jsonl")
        return [ReconstructionExample.from_json(r) for r in rows]

    def _load_annotations(self) -> list[Annotation]:
        rows = read_jsonl(self.manifest.stage_dir("annotate") / "annotations.jsonl")
        return [Annotation.from_json(r) for r in rows]

    def _load_pairs(self, stage: str) -> list[SyntheticPair]:
        rows = read_jsonl(self.manifest.stage_dir(stage) / "pairs.jsonl")
        return [SyntheticPair.from_json(r) for r in rows]

    # -- stage implementations ---------------------------------------------

    def _stage_split(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("split")
        pairs = corpus.load_pairs(cfg["corpus"], cfg["task"])
        split = corpus.split_unpaired(pairs, cfg["source_fraction"], cfg["seed"])
        shots = corpus.sample_shots(list(split.source_set), cfg["shots"], cfg["seed"])
        target_pool = corpus.sample_shots(list(split.target_set), cfg["targets"], cfg["seed"] + 1)

        indices = list(range(len(target_pool)))
        random.Random(cfg["seed"] + 2).shuffle(indices)
        n_val = round(len(target_pool) * cfg["target_val_fraction"])
        val_idx = set(indices[:n_val])
        targets_train = [t for i, t in enumerate(target_pool) if i not in val_idx]
        targets_val = [t for i, t in enumerate(target_pool) if i in val_idx]

        artifacts = []
        for name, records in (
            ("source_pool.jsonl", split.source_set),
            ("target_pool.jsonl", target_pool),
            ("shots.jsonl", shots),
            ("targets_train.jsonl", targets_train),
            ("targets_val.jsonl", targets_val),
        ):
            corpus.write_records(out / name, records)
            artifacts.append(out / name)
        if cfg.get("test_corpus"):
            test_pairs = corpus.load_pairs(cfg["test_corpus"], cfg["task"])
            flat = [rec for pair in test_pairs for rec in pair]
            corpus.write_records(out / "test_pairs.jsonl", flat)
            artifacts.append(out / "test_pairs.jsonl")
        logger.info(
            "split: %d shots, %d train targets, %d val targets",
            len(shots),
            len(targets_train),
            len(targets_val),
        )
        return artifacts

    def _stage_extract(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("extract")
        ledger = CostLedger()
        shots = self._load_shots()
        examples, failures = pipeline.extract_source_irs(
            shots,
            self.endpoint("teacher"),
            cfg["task"],
            cfg["variant"],
            parallelism=cfg["parallelism"],
            ledger=ledger,
            out_dir=out,
        )
        usage_path = self._write_usage("extract", ledger)
        logger.info("extract: %d IRs, %d failures", len(examples), len(failures))
        return [out / "recon_examples.jsonl", out / "failures.json", out / "stats.json", usage_path]

    def _stage_build_recon(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("build_recon")
        examples = self._load_examples()
        train_path, val_path = pipeline.build_reconstruction_dataset(
            examples, cfg["recon_val_fraction"], cfg["seed"], out
        )
        return [train_path, val_path]

    def _stage_annotate(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("annotate")
        ledger = CostLedger()
        examples = self._load_examples()
        demos = pipeline.build_demos(examples, cfg["demo_count"])
        self.manifest.demo_ids = [
            e.record_id for e in sorted(examples, key=lambda e: e.record_id)[: cfg["demo_count"]]
        ]
        shots_texts = [rec.text for rec in self._load_shots()]
        hint = size_hint_for(cfg["task"], shots_texts)

        split_dir = self.manifest.stage_dir("split")
        train = corpus.load_records(split_dir / "targets_train.jsonl", cfg["task"], "target")
        val = corpus.load_records(split_dir / "targets_val.jsonl", cfg["task"], "target")
        targets = train + val
        pools = ["train"] * len(train) + ["val"] * len(val)
        annotations, failures = pipeline.annotate_target_irs(
            targets,
            self.endpoint("teacher"),
            demos,
            cfg["task"],
            cfg["variant"],
            size_hint=hint,
            pools=pools,
            parallelism=cfg["parallelism"],
            ledger=ledger,
            out_dir=out,
        )
        usage_path = self._write_usage("annotate", ledger)
        logger.info("annotate: %d IRs, %d failures", len(annotations), len(failures))
        return [out / "annotations.jsonl", out / "failures.json", usage_path]

    def _stage_synthesize(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("synthesize")
        ledger = CostLedger()
        annotations = self._load_annotations()
        hints = mean_length_targets(cfg["task"], [rec.text for rec in self._load_shots()])
        pairs, drops = pipeline.synthesize_sources(
            annotations,
            self.endpoint("student"),
            cfg["task"],
            hints,
            teacher_name="teacher",
            parallelism=cfg["parallelism"],
            ledger=ledger,
            out_dir=out,
        )
        usage_path = self._write_usage("synthesize", ledger)
        logger.info("synthesize: %d pairs, %d drops", len(pairs), len(drops))
        return [out / "pairs.jsonl", out / "drops.json", usage_path]

    def _stage_select(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("select")
        n = cfg["bon"]
        if n <= 1:
            # best-of-n disabled: the stage passes synthesis through untouched
            src = self.manifest.stage_dir("synthesize") / "pairs.jsonl"
            shutil.copyfile(src, out / "pairs.jsonl")
            write_jsonl(out / "candidates.jsonl", [])
            write_json(out / "drops.json", {"dropped": []})
            ledger = CostLedger()
            usage_path = self._write_usage("select", ledger)
            return [out / "pairs.jsonl", out / "candidates.jsonl", out / "drops.json", usage_path]
        ledger = CostLedger()
        annotations = self._load_annotations()
        hints = mean_length_targets(cfg["task"], [rec.text for rec in self._load_shots()])
        pairs, drops = selector.run_best_of_n(
            annotations,
            self.endpoint("student"),
            self.endpoint("judge"),
            self.endpoint("ranker"),
            cfg["task"],
            hints,
            n,
            temperature=cfg["bon_temperature"],
            teacher_name="teacher",
            parallelism=cfg["parallelism"],
            ledger=ledger,
            out_dir=out,
        )
        usage_path = self._write_usage("select", ledger)
        logger.info("select: best-of-%d kept %d pairs, %d drops", n, len(pairs), len(drops))
        return [out / "pairs.jsonl", out / "candidates.jsonl", out / "drops.json", usage_path]

    def _stage_build_downstream(self) -> list[Path]:
        out = self._stage_dir("build_downstream")
        pairs = self._load_pairs("select")
        train = [p for p in pairs if p.pool == "train"]
        val = [p for p in pairs if p.pool == "val"]
        train_path, val_path = pipeline.build_downstream_dataset(train, val, out)
        return [train_path, val_path]

    def _stage_evaluate(self) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("evaluate")
        if not cfg.get("test_corpus"):
            report = {"skipped": "no test_corpus configured"}
            write_json(out / "report.json", report)
            write_text(out / "report.txt", "evaluation skipped: no test_corpus configured\n")
            return [out / "report.json", out / "report.txt"]
        ledger = CostLedger()
        test_pairs = corpus.load_pairs(self.manifest.stage_dir("split") / "test_pairs.jsonl", cfg["task"])
        role = "downstream" if "downstream" in cfg["endpoints"] else "student"
        endpoint = self.endpoint(role)
        predictions: list[tuple[str, str]] = []
        references: list[tuple[str, str]] = []
        rows = []
        requests_list = [
            prompts.render_downstream_prompt(cfg["task"], src.text, answer_span=src.answer_span)
            for src, _ in test_pairs
        ]
        results = gateway.complete_batch(endpoint, requests_list, cfg["parallelism"], {"seed": 0})
        for (src, tgt), result in zip(test_pairs, results):
            if isinstance(result, gateway.GatewayError):
                raise StageFailure(f"evaluation generation failed for {src.id!r}: {result}")
            ledger.record("evaluate", endpoint.role, result.usage)
            pid = src.origin_pair_id
            predictions.append((pid, result.text.strip()))
            references.append((pid, tgt.text))
            rows.append({"pair_id": pid, "prediction": result.text.strip(), "reference": tgt.text})
        report = metrics.corpus_report(predictions, references)
        report_obj: dict = report.to_json()
        table = report.format_table()
        if cfg["rubric_runs"] > 0:
            judge = self.endpoint("judge")
            sums = {dim: 0.0 for dim in prompts.RUBRIC_DIMENSIONS}
            for (pid, pred), (src, _) in zip(predictions, test_pairs):
                score = metrics.rubric_eval(
                    pred, src.text, judge, runs=cfg["rubric_runs"], warn=logger.warning
                )
                for dim in sums:
                    sums[dim] += getattr(score, dim)
            rubric = {dim: round(total / len(predictions), 3) for dim, total in sums.items()}
            rubric["average"] = round(sum(rubric.values()) / len(rubric), 3)
            # judge-relative scores: absolute values depend on the judge model
            report_obj["rubric"] = rubric
            table += "\nrubric (judge-relative): " + ", ".join(
                f"{k}={v}" for k, v in rubric.items()
            )
        write_jsonl(out / "predictions.jsonl", rows)
        write_json(out / "report.json", report_obj)
        write_text(out / "report.txt", table + "\n")
        usage_path = self._write_usage("evaluate", ledger)
        logger.info("evaluate: %s", table.replace("\n", " | "))
        return [out / "predictions.jsonl", out / "report.json", out / "report.txt", usage_path]

    def _stage_cost(self, baseline_path: str | None = None) -> list[Path]:
        cfg = self.config
        out = self._stage_dir("cost")
        artifacts = []
        ledger = CostLedger()
        if cfg.get("direct_baseline"):
            all_pairs = corpus.load_pairs(cfg["corpus"], cfg["task"])
            target_by_pair = {src.origin_pair_id: tgt for src, tgt in all_pairs}
            shots = self._load_shots()
            direct_targets = [
                target_by_pair[rec.origin_pair_id]
                for rec in shots
                if rec.origin_pair_id in target_by_pair
            ]
            demo_sources = [rec.text for rec in shots[: cfg["demo_count"]]]
            hints = mean_length_targets(cfg["task"], [rec.text for rec in shots])
            pipeline.run_direct_baseline(
                direct_targets,
                self.endpoint("teacher"),
                cfg["task"],
                demo_sources,
                hints,
                parallelism=cfg["parallelism"],
                ledger=ledger,
                out_dir=out,
            )
            artifacts.append(out / "direct.jsonl")
        self._write_usage("cost", ledger)
        artifacts.append(out / "usage.jsonl")

        # merge per-stage usage slices into the run ledger, in stage order
        merged = CostLedger()
        for stage in STAGES:
            usage_file = self.manifest.stage_dir(stage) / "usage.jsonl"
            if usage_file.exists():
                merged.entries.extend(CostLedger.load(usage_file).entries)
        ledger_path = self.manifest.ledger_path
        if ledger_path.exists():
            ledger_path.unlink()
        merged.append_to(ledger_path)
        artifacts.append(ledger_path)

        pipeline_costs = CostLedger([e for e in merged.entries if e.stage != "direct"])
        direct_entries = [e for e in merged.entries if e.stage == "direct"]
        baseline = None
        baseline_file = baseline_path or cfg.get("baseline_ledger")
        if baseline_file:
            baseline = CostLedger.load(baseline_file)
        elif direct_entries:
            baseline = CostLedger(direct_entries)
        report = metrics.cost_report(pipeline_costs, baseline)
        report_obj = report.to_json()
        if direct_entries:
            ir_tokens = pipeline_costs.total("completion_tokens", role="teacher", stages={"extract"})
            direct_tokens = CostLedger(direct_entries).total("completion_tokens", role="teacher")
            report_obj["direct_check"] = {
                "extract_completion_tokens": ir_tokens,
                "direct_completion_tokens": direct_tokens,
            }
        write_json(out / "report.json", report_obj)
        write_text(out / "report.txt", report.format_table() + "\n")
        artifacts += [out / "report.json", out / "report.txt"]
        return artifacts

    # -- orchestration -------------------------------------------------------

    def run_stage(self, stage: str, baseline: str | None = None) -> None:
        if stage not in STAGES:
            raise ManifestError(f"unknown stage {stage!r}")
        for earlier in STAGES[: STAGES.index(stage)]:
            if self.manifest.state(earlier) != "done":
                raise StageNotReady(
                    f"stage not ready: {stage!r} needs {earlier!r}, which is "
                    f"{self.manifest.state(earlier)}"
                )
        impl = {
            "split": self._stage_split,
            "extract": self._stage_extract,
            "build_recon": self._stage_build_recon,
            "annotate": self._stage_annotate,
            "synthesize": self._stage_synthesize,
            "select": self._stage_select,
            "build_downstream": self._stage_build_downstream,
            "evaluate": self._stage_evaluate,
        }
        try:
            if stage == "cost":
                artifacts = self._stage_cost(baseline_path=baseline)
            else:
                artifacts = impl[stage]()
        except Exception as exc:
            self.manifest.mark_failed(stage, f"{type(exc).__name__}: {exc}")
            raise
        self.manifest.mark_done(stage, artifacts)

    def run_all(self, baseline: str | None = None) -> None:
        for stage in STAGES:
            if self.manifest.state(stage) == "done":
                logger.info("skipping %s (already done)", stage)
                continue
            logger.info("running stage %s", stage)
            self.run_stage(stage, baseline=baseline)
