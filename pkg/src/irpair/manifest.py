"""Run configuration, the provenance manifest, and resumability bookkeeping.

A run is addressed by a YAML config file. The schema is strict: an unknown
key anywhere fails run creation by name, because a silently ignored typo
(``temprature``) would invalidate experiment comparisons. The manifest
snapshot of the config is immutable after creation; CLI overrides are
applied before the snapshot is taken.

Stage completion is gated by SHA-256 checksums over artifacts, not
timestamps: resuming verifies every done stage's files and demotes a stage
whose artifact changed.
"""

from __future__ import annotations

import json
import random
import secrets
import time
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import __version__
from .corpus import TASKS
from .gateway import EndpointProfile
from .ir import VARIANTS
from .storage import sha256_file

STAGES = (
    "split",
    "extract",
    "build_recon",
    "annotate",
    "synthesize",
    "select",
    "build_downstream",
    "evaluate",
    "cost",
)

_ENDPOINT_KEYS = {
    "base_url": str,
    "model_id": str,
    "api_key_env": str,
    "max_retries": int,
    "timeout": (int, float),
    "temperature": (int, float),
    "max_tokens": int,
}

_TOP_KEYS = {
    "run_id": str,
    "task": str,
    "variant": str,
    "seed": int,
    "corpus": str,
    "test_corpus": str,
    "source_fraction": (int, float),
    "shots": int,
    "targets": int,
    "target_val_fraction": (int, float),
    "recon_val_fraction": (int, float),
    "demo_count": int,
    "bon": int,
    "bon_temperature": (int, float),
    "parallelism": int,
    "rubric_runs": int,
    "direct_baseline": bool,
    "baseline_ledger": str,
    "endpoints": dict,
}

_DEFAULTS = {
    "variant": "sectioned",
    "source_fraction": 0.4,
    "shots": 20,
    "targets": 30,
    "target_val_fraction": 0.2,
    "recon_val_fraction": 0.1,
    "demo_count": 3,
    "bon": 0,
    "bon_temperature": 0.7,
    "parallelism": 4,
    "rubric_runs": 0,
    "direct_baseline": False,
}

_ENDPOINT_ROLES = ("teacher", "student", "judge", "ranker", "downstream")


class ConfigError(ValueError):
    pass


class ManifestError(RuntimeError):
    pass


def _check_keys(obj: dict, allowed: dict, where: str) -> None:
    for key, value in obj.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {where}")
        expected = allowed[key]
        if value is not None and not isinstance(value, expected):
            names = (
                expected.__name__
                if isinstance(expected, type)
                else "/".join(t.__name__ for t in expected)
            )
            raise ConfigError(f"{where}.{key} must be {names}, got {type(value).__name__}")


def validate_config(raw: dict) -> dict:
    """Strict-schema validation; returns the config with defaults filled."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a mapping, got {type(raw).__name__}")
    _check_keys(raw, _TOP_KEYS, "config")
    config = dict(_DEFAULTS)
    config.update({k: v for k, v in raw.items() if v is not None})

    for key in ("task", "corpus", "endpoints"):
        if key not in config:
            raise ConfigError(f"config is missing required key {key!r}")
    if config["task"] not in TASKS:
        raise ConfigError(f"config.task must be one of {TASKS}, got {config['task']!r}")
    if config["variant"] not in VARIANTS:
        raise ConfigError(f"config.variant must be one of {VARIANTS}, got {config['variant']!r}")
    if not 0 < config["source_fraction"] < 1:
        raise ConfigError(f"config.source_fraction must be in (0, 1), got {config['source_fraction']}")
    for key in ("target_val_fraction", "recon_val_fraction"):
        if not 0 <= config[key] < 1:
            raise ConfigError(f"config.{key} must be in [0, 1), got {config[key]}")
    for key in ("shots", "targets", "demo_count", "parallelism"):
        if config[key] < 1:
            raise ConfigError(f"config.{key} must be >= 1, got {config[key]}")
    if config["bon"] < 0:
        raise ConfigError(f"config.bon must be >= 0, got {config['bon']}")

    endpoints = config["endpoints"]
    for role, spec in endpoints.items():
        if role not in _ENDPOINT_ROLES:
            raise ConfigError(f"unknown config key {role!r} in config.endpoints")
        if not isinstance(spec, dict):
            raise ConfigError(f"config.endpoints.{role} must be a mapping")
        _check_keys(spec, _ENDPOINT_KEYS, f"config.endpoints.{role}")
        if "base_url" not in spec:
            raise ConfigError(f"config.endpoints.{role} is missing base_url")
    for role in ("teacher", "student"):
        if role not in endpoints:
            raise ConfigError(f"config.endpoints is missing the {role!r} endpoint")
    if config["bon"] > 1:
        for role in ("judge", "ranker"):
            if role not in endpoints:
                raise ConfigError(f"best-of-n runs need config.endpoints.{role}")
    if config["rubric_runs"] > 0 and "judge" not in endpoints:
        raise ConfigError("rubric evaluation needs config.endpoints.judge")

    if "seed" not in config:
        config["seed"] = random.randrange(2**31)
    if "run_id" not in config:
        config["run_id"] = f"run-{secrets.token_hex(4)}"
    return config


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        try:
            raw = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return validate_config(raw or {})


def endpoint_from_config(config: dict, role: str) -> EndpointProfile:
    spec = config["endpoints"].get(role)
    if spec is None:
        raise ConfigError(f"config.endpoints has no {role!r} endpoint")
    wire_role = "student" if role == "downstream" else role
    return EndpointProfile(
        name=role,
        base_url=spec["base_url"],
        model_id=spec.get("model_id", f"mock-{role}"),
        role=wire_role,
        api_key_env=spec.get("api_key_env"),
        max_retries=spec.get("max_retries", 2),
        timeout=float(spec.get("timeout", 60.0)),
        temperature=float(spec.get("temperature", 0.0)),
        max_tokens=spec.get("max_tokens", 1024),
    )


@dataclass
class RunManifest:
    run_id: str
    config: dict
    stages: dict
    run_dir: Path
    tool_version: str = __version__
    created_at: float = 0.0
    demo_ids: list[str] | None = None
    flags: dict | None = None

    @property
    def path(self) -> Path:
        return self.run_dir / "manifest.json"

    @property
    def ledger_path(self) -> Path:
        return self.run_dir / "ledger.jsonl"

    def stage_dir(self, stage: str) -> Path:
        return self.run_dir / stage

    def save(self) -> None:
        payload = {
            "run_id": self.run_id,
            "tool_version": self.tool_version,
            "created_at": self.created_at,
            "config": self.config,
            "stages": self.stages,
            "demo_ids": self.demo_ids or [],
            "flags": self.flags or {},
        }
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    def state(self, stage: str) -> str:
        return self.stages[stage]["state"]

    def mark_done(self, stage: str, artifacts: list[Path]) -> None:
        checksums = {}
        for artifact in artifacts:
            rel = str(Path(artifact).relative_to(self.run_dir))
            checksums[rel] = sha256_file(artifact)
        self.stages[stage] = {"state": "done", "artifacts": checksums}
        self.save()

    def mark_failed(self, stage: str, reason: str) -> None:
        existing = self.stages[stage].get("artifacts", {})
        self.stages[stage] = {"state": "failed", "artifacts": existing, "reason": reason}
        self.save()

    def next_pending(self) -> str | None:
        for stage in STAGES:
            if self.stages[stage]["state"] != "done":
                return stage
        return None

    def artifact_checksums(self) -> dict:
        return {stage: dict(info.get("artifacts", {})) for stage, info in self.stages.items()}

    def verify_artifacts(self) -> list[str]:
        """Re-checksum done stages; demote corrupted ones to failed."""
        demoted = []
        for stage in STAGES:
            info = self.stages[stage]
            if info["state"] != "done":
                continue
            for rel, expected in info.get("artifacts", {}).items():
                path = self.run_dir / rel
                if not path.exists() or sha256_file(path) != expected:
                    self.mark_failed(stage, f"artifact checksum mismatch: {rel}")
                    demoted.append(stage)
                    break
        return demoted


def create_run(
    config_path: str | Path, runs_dir: str | Path = "runs", overrides: dict | None = None
) -> RunManifest:
    """Validate config, apply CLI overrides, and lay down a fresh run directory."""
    config = load_config(config_path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown override {key!r}")
        config[key] = value
    config = validate_config(config)

    run_dir = Path(runs_dir) / config["run_id"]
    if run_dir.exists():
        raise ConfigError(f"run directory already exists: {run_dir} (use resume)")
    manifest = RunManifest(
        run_id=config["run_id"],
        config=config,
        stages={stage: {"state": "pending", "artifacts": {}} for stage in STAGES},
        run_dir=run_dir,
        created_at=time.time(),
    )
    manifest.save()
    return manifest


def load_run(run_id: str, runs_dir: str | Path = "runs") -> RunManifest:
    run_dir = Path(runs_dir) / run_id
    path = run_dir / "manifest.json"
    if not path.exists():
        raise ManifestError(f"no manifest found for run {run_id!r} under {runs_dir}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return RunManifest(
        run_id=payload["run_id"],
        config=payload["config"],
        stages=payload["stages"],
        run_dir=run_dir,
        tool_version=payload.get("tool_version", __version__),
        created_at=payload.get("created_at", 0.0),
        demo_ids=payload.get("demo_ids") or [],
        flags=payload.get("flags") or {},
    )


def resume_run(run_id: str, runs_dir: str | Path = "runs") -> tuple[RunManifest, str | None]:
    """Verify done-stage checksums and return the first stage still to run."""
    manifest = load_run(run_id, runs_dir)
    manifest.verify_artifacts()
    return manifest, manifest.next_pending()
