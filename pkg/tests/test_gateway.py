from __future__ import annotations

import json
import threading
import time

import pytest

from helpers import completion_payload, fake_server
from irpair import gateway, mocks
from irpair.gateway import (
    EndpointProfile,
    GenerationResult,
    RequestError,
    TransportError,
    complete,
    complete_batch,
)

MESSAGES = [{"role": "system", "content": "be brief"}, {"role": "user", "content": "say hi"}]


def _endpoint(base_url, **kw):
    defaults = dict(name="ep", model_id="m", role="student", max_retries=2, timeout=5.0)
    defaults.update(kw)
    return EndpointProfile(base_url=base_url, **defaults)


@pytest.fixture(autouse=True)
def fast_backoff(monkeypatch):
    monkeypatch.setattr(gateway, "BACKOFF_BASE", 0.01)
    monkeypatch.setattr(gateway, "BACKOFF_CAP", 0.02)


def test_profile_invariants():
    with pytest.raises(ValueError):
        _endpoint("mock://student", max_retries=-1)
    with pytest.raises(ValueError):
        _endpoint("mock://student", timeout=0)
    with pytest.raises(ValueError):
        _endpoint("mock://student", role="wizard")


def test_mock_is_deterministic(judge):
    msgs = [{"role": "user", "content": "Candidate source:\nalpha beta gamma\nTarget:\ngamma delta"}]
    first = complete(judge, msgs)
    second = complete(judge, msgs)
    assert first.text == second.text
    assert first.usage == second.usage
    assert first.usage.wall_time == 0.0 and first.usage.attempt_count == 1


def test_mock_usage_counts_whitespace_tokens(judge):
    msgs = [{"role": "user", "content": "Candidate source:\none two\nTarget:\nthree four five"}]
    result = complete(judge, msgs)
    assert result.usage.prompt_tokens == sum(len(m["content"].split()) for m in msgs)
    assert result.usage.completion_tokens == len(result.text.split())


def test_empty_messages_rejected_before_network(student):
    with pytest.raises(RequestError):
        complete(student, [])


def test_unknown_override_rejected(student):
    with pytest.raises(RequestError):
        complete(student, MESSAGES, {"tempratur": 1.0})


def test_retry_429_twice_then_success():
    calls = []

    def script(handler, body):
        calls.append(body)
        if len(calls) < 3:
            return 429, {"error": "slow down"}
        return 200, completion_payload("hello there")

    with fake_server(script) as base_url:
        result = complete(_endpoint(base_url), MESSAGES)
    assert result.text == "hello there"
    assert result.usage.attempt_count == 3
    assert len(calls) == 3


def test_retries_exhausted_is_transport_error():
    def script(handler, body):
        return 503, {"error": "down"}

    with fake_server(script) as base_url:
        with pytest.raises(TransportError, match="HTTP 503"):
            complete(_endpoint(base_url, max_retries=1), MESSAGES)


def test_4xx_is_request_error_with_server_message():
    def script(handler, body):
        return 400, {"error": "bad model id"}

    with fake_server(script) as base_url:
        with pytest.raises(RequestError, match="bad model id"):
            complete(_endpoint(base_url), MESSAGES)


def test_api_key_in_header_never_in_body(monkeypatch):
    monkeypatch.setenv("FAKE_KEY_ENV", "sk-secret-123")
    seen = {}

    def script(handler, body):
        seen["auth"] = handler.headers.get("Authorization")
        seen["body"] = json.dumps(body)
        return 200, completion_payload("ok")

    with fake_server(script) as base_url:
        complete(_endpoint(base_url, api_key_env="FAKE_KEY_ENV"), MESSAGES)
    assert seen["auth"] == "Bearer sk-secret-123"
    assert "sk-secret-123" not in seen["body"]


def test_usage_fallback_sets_estimated_flag():
    def script(handler, body):
        return 200, {"choices": [{"message": {"content": "four words right here"}}]}

    with fake_server(script) as base_url:
        result = complete(_endpoint(base_url), MESSAGES)
    assert result.usage.estimated
    assert result.usage.completion_tokens == 4


def test_request_body_shape():
    seen = {}

    def script(handler, body):
        seen.update(body)
        return 200, completion_payload("ok")

    with fake_server(script) as base_url:
        complete(_endpoint(base_url, temperature=0.5, max_tokens=64), MESSAGES, {"seed": 3})
    assert seen["model"] == "m"
    assert seen["temperature"] == 0.5
    assert seen["max_tokens"] == 64
    assert seen["seed"] == 3
    assert seen["messages"] == MESSAGES


def test_batch_preserves_input_order():
    def script(handler, body):
        text = body["messages"][0]["content"]
        time.sleep(0.02 if "slow" in text else 0.0)
        return 200, completion_payload(f"echo {text}")

    requests_list = [[{"role": "user", "content": f"{'slow' if i % 3 == 0 else 'fast'} {i}"}] for i in range(12)]
    with fake_server(script) as base_url:
        results = complete_batch(_endpoint(base_url), requests_list, parallelism=8)
    assert [r.text for r in results] == [f"echo {m[0]['content']}" for m in requests_list]


def test_batch_item_failure_does_not_abort():
    def script(handler, body):
        if "item-5" in body["messages"][0]["content"]:
            return 404, {"error": "missing"}
        return 200, completion_payload("ok")

    requests_list = [[{"role": "user", "content": f"item-{i}"}] for i in range(10)]
    with fake_server(script) as base_url:
        results = complete_batch(_endpoint(base_url), requests_list, parallelism=4)
    assert isinstance(results[5], RequestError)
    assert all(isinstance(r, GenerationResult) for i, r in enumerate(results) if i != 5)


def test_batch_respects_parallelism_bound():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def script(handler, body):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.02)
        with lock:
            state["now"] -= 1
        return 200, completion_payload("ok")

    requests_list = [[{"role": "user", "content": str(i)}] for i in range(12)]
    with fake_server(script) as base_url:
        complete_batch(_endpoint(base_url), requests_list, parallelism=3)
    assert state["peak"] <= 3


def test_batch_parallelism_one_runs_in_order():
    order = []

    def script(handler, body):
        order.append(body["messages"][0]["content"])
        return 200, completion_payload("ok")

    requests_list = [[{"role": "user", "content": str(i)}] for i in range(6)]
    with fake_server(script) as base_url:
        complete_batch(_endpoint(base_url), requests_list, parallelism=1)
    assert order == [str(i) for i in range(6)]


def test_batch_rejects_bad_parallelism(student):
    with pytest.raises(RequestError):
        complete_batch(student, [MESSAGES], parallelism=0)


def test_mock_cycle_and_constant():
    cycle = _endpoint("mock://cycle?texts=3|4", role="judge")
    mocks.reset_cycles()
    replies = [complete(cycle, MESSAGES).text for _ in range(4)]
    assert replies == ["3", "4", "3", "4"]
    constant = _endpoint("mock://constant?text=hello", role="judge")
    assert complete(constant, MESSAGES).text == "hello"


def test_mock_unknown_behavior_is_request_error():
    with pytest.raises(RequestError):
        complete(_endpoint("mock://nonsense"), MESSAGES)
