from __future__ import annotations

import pytest
import yaml

from irpair import toydata
from irpair.gateway import EndpointProfile

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

MOCK_ENDPOINTS = {
    "teacher": {"base_url": "mock://teacher"},
    "student": {"base_url": "mock://student"},
    "judge": {"base_url": "mock://judge"},
    "ranker": {"base_url": "mock://ranker"},
}


@pytest.fixture
def teacher() -> EndpointProfile:
    return EndpointProfile(name="teacher", base_url="mock://teacher", model_id="m", role="teacher")


@pytest.fixture
def student() -> EndpointProfile:
    return EndpointProfile(name="student", base_url="mock://student", model_id="m", role="student")


@pytest.fixture
def judge() -> EndpointProfile:
    return EndpointProfile(name="judge", base_url="mock://judge", model_id="m", role="judge")


@pytest.fixture
def ranker() -> EndpointProfile:
    return EndpointProfile(name="ranker", base_url="mock://ranker", model_id="m", role="ranker")


def write_config(tmp_path, task: str, *, pairs: int = 50, test_pairs: int = 10, **overrides):
    """Toy corpus + config file for one task; returns the config path."""
    corpus_path = tmp_path / f"corpus_{task}.jsonl"
    toydata.write_pair_file(corpus_path, toydata.generate_pairs(task, pairs, seed=3))
    config = {
        "task": task,
        "corpus": str(corpus_path),
        "seed": 7,
        "source_fraction": 0.4,
        "shots": 20,
        "targets": 30,
        "target_val_fraction": 0.2,
        "parallelism": 4,
        "endpoints": dict(MOCK_ENDPOINTS),
    }
    if test_pairs:
        test_path = tmp_path / f"test_{task}.jsonl"
        toydata.write_pair_file(
            test_path, toydata.generate_pairs(task, test_pairs, seed=4, start_index=pairs)
        )
        config["test_corpus"] = str(test_path)
    config.update(overrides)
    config_path = tmp_path / f"config_{task}.yaml"
    config_path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return config_path
