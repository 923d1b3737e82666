from __future__ import annotations

import json
from pathlib import Path

import pytest

MARKER = "=== Dialogue Begins ==="

ACCEPTANCE_LINES: list[str] = []


def record_criterion(line: str) -> None:
    """Collect acceptance pass lines; they print after capture ends."""
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

_WORDS = [
    "harbor", "garden", "signal", "bridge", "window", "meadow", "ticket",
    "engine", "anchor", "valley", "market", "record", "sample", "devon",
]


def tiny_contract_rows(n: int, completion_prefix: str = MARKER) -> list[dict]:
    """Small synthetic IR -> dialogue rows: enough structure to overfit fast."""
    rows = []
    for i in range(n):
        a, b = _WORDS[i % len(_WORDS)], _WORDS[(i + 3) % len(_WORDS)]
        prompt = (
            "Reconstruct the conversation from the summaries.\n"
            "Start your answer with exactly the line: === Dialogue Begins ===\n\n"
            f"Segment 1: Ana asks about the {a}.\nSegment 2: Ben checks the {b}."
        )
        completion = (
            f"{completion_prefix}\n"
            f"Ana: Have you seen the {a} today?\n"
            f"Ben: Yes, the {b} is ready."
        )
        rows.append({"id": f"ex-{i:03d}", "prompt": prompt, "completion": completion})
    return rows


def write_contract(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def micro_checkpoint(tmp_path_factory):
    """One small trained model shared by the serving tests."""
    from irpair_trainer.train import TrainConfig, train

    root = tmp_path_factory.mktemp("micro")
    train_file = write_contract(root / "train.jsonl", tiny_contract_rows(20))
    val_file = write_contract(root / "val.jsonl", tiny_contract_rows(4))
    config = TrainConfig(seed=1, max_steps=150, eval_interval=25, warmup_batches=10, peak_lr=1e-3)
    result = train(train_file, val_file, config, "inversion", root / "ckpt", log=lambda *a: None)
    return result.best.path
