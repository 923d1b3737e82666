"""Command-line surface binding all stages into reproducible runs.

Exit codes are a stable contract: 0 success, 1 validation/config/usage
errors (including "stage not ready"), 2 transport or stage failures.
Human-readable logs go to stderr, machine artifacts to files, and a brief
summary to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .corpus import CorpusError
from .gateway import GatewayError
from .manifest import ConfigError, ManifestError, create_run, load_run, resume_run
from .metrics import MetricsError
from .pipeline import PipelineError
from .prompts import PromptError
from .runner import Runner, StageFailure, StageNotReady
from .selector import SelectorError

logger = logging.getLogger("irpair")

# CLI command -> manifest stage
STAGE_COMMANDS = {
    "split": "split",
    "extract-ir": "extract",
    "build-recon": "build_recon",
    "annotate": "annotate",
    "synthesize": "synthesize",
    "select": "select",
    "build-downstream": "build_downstream",
    "evaluate": "evaluate",
    "cost": "cost",
}

_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    ManifestError,
    PromptError,
    MetricsError,
    StageNotReady,
)
_STAGE_ERRORS = (PipelineError, SelectorError, GatewayError, StageFailure, OSError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="irpair", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", help="run config file (YAML)")
        p.add_argument("--runs-dir", default="runs", help="directory holding run folders")
        p.add_argument("--run-id", help="run identifier")
        p.add_argument("--bon", type=int, help="best-of-n candidate count (0 or 1 disables)")
        p.add_argument(
            "--variant", choices=("sectioned", "hierarchical", "cot"), help="IR format variant"
        )
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--parallelism", type=int, help="max in-flight endpoint requests")

    for command in list(STAGE_COMMANDS) + ["run-all", "resume"]:
        p = sub.add_parser(command)
        add_common(p)
        if command == "cost":
            p.add_argument("--baseline", help="baseline cost ledger file for comparison")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "run_id": args.run_id,
        "bon": args.bon,
        "variant": args.variant,
        "seed": args.seed,
        "parallelism": args.parallelism,
    }


def _get_runner(args: argparse.Namespace, create_if_missing: bool) -> Runner:
    if args.run_id:
        try:
            return Runner(load_run(args.run_id, args.runs_dir))
        except ManifestError:
            if not create_if_missing:
                raise
    if not create_if_missing:
        raise ConfigError("this command needs --run-id of an existing run")
    if not args.config:
        raise ConfigError("creating a run needs --config")
    manifest = create_run(args.config, args.runs_dir, overrides=_overrides(args))
    logger.info("created run %s under %s", manifest.run_id, manifest.run_dir)
    return Runner(manifest)


def _print_summary(runner: Runner, stage: str) -> None:
    manifest = runner.manifest
    line = {"run_id": manifest.run_id, "stage": stage, "state": manifest.state(stage)}
    print(json.dumps(line, sort_keys=True))
    if stage == "cost":
        report = manifest.stage_dir("cost") / "report.txt"
        if report.exists():
            print(report.read_text(encoding="utf-8"), end="")


def dispatch(argv: list[str] | None = None) -> int:
    """Parse argv, run the command, map exceptions to the exit-code contract."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1

    try:
        if args.command == "run-all":
            runner = _get_runner(args, create_if_missing=True)
            runner.run_all()
            for stage in ("select", "cost"):
                _print_summary(runner, stage)
            return 0
        if args.command == "resume":
            manifest, next_stage = resume_run(args.run_id, args.runs_dir) if args.run_id else (None, None)
            if manifest is None:
                raise ConfigError("resume needs --run-id")
            if next_stage is None:
                print(json.dumps({"run_id": manifest.run_id, "status": "nothing to do"}))
                return 0
            runner = Runner(manifest)
            runner.run_all()
            print(json.dumps({"run_id": manifest.run_id, "resumed_from": next_stage}))
            return 0
        stage = STAGE_COMMANDS[args.command]
        runner = _get_runner(args, create_if_missing=(stage == "split"))
        runner.run_stage(stage, baseline=getattr(args, "baseline", None))
        _print_summary(runner, stage)
        return 0
    except _VALIDATION_ERRORS as exc:
        logger.error("%s", exc)
        return 1
    except _STAGE_ERRORS as exc:
        logger.error("%s", exc)
        return 2


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
