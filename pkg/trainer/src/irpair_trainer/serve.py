"""Serve a checkpoint behind the pipeline's chat-completions wire protocol.

``POST /v1/chat/completions`` accepts ``{model, messages, temperature,
max_tokens, seed}`` and returns OpenAI-shaped JSON with real token usage
from the checkpoint's tokenizer. Message bodies are flattened with blank
lines between them, matching the trainer-contract prompt format, so the
served model sees exactly the surface it was trained on. Requests that
exceed the context window get a structured 400, not a crash.
"""

from __future__ import annotations

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .model import TinyDecoder
from .tokenizer import Vocab
from .train import load_checkpoint


class ModelRunner:
    """Checkpoint plus a lock: one generation at a time on CPU."""

    def __init__(self, model: TinyDecoder, vocab: Vocab, model_name: str = "tiny-decoder"):
        self.model = model
        self.vocab = vocab
        self.model_name = model_name
        self._lock = threading.Lock()

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "ModelRunner":
        model, vocab, payload = load_checkpoint(path)
        return cls(model, vocab, model_name=f"tiny-decoder/{payload.get('role', 'unknown')}")

    def complete(self, body: dict) -> tuple[int, dict]:
        messages = body.get("messages")
        if not isinstance(messages, list) or not messages:
            return 400, {"error": {"message": "messages must be a non-empty list"}}
        try:
            prompt_text = "\n\n".join(m["content"] for m in messages)
        except (TypeError, KeyError):
            return 400, {"error": {"message": "each message needs a content field"}}
        temperature = float(body.get("temperature", 0.0))
        max_tokens = int(body.get("max_tokens", 256))
        seed = body.get("seed")

        prompt_ids = [self.vocab.bos_id, *self.vocab.encode(prompt_text), self.vocab.sep_id]
        if len(prompt_ids) + 1 >= self.model.cfg.max_positions:
            return 400, {
                "error": {
                    "message": (
                        f"prompt of {len(prompt_ids)} tokens exceeds the context window "
                        f"of {self.model.cfg.max_positions}"
                    ),
                    "type": "context_length_exceeded",
                }
            }
        budget = min(max_tokens, self.model.cfg.max_positions - len(prompt_ids) - 1)
        with self._lock:
            out_ids = self.model.generate(
                prompt_ids,
                max_new_tokens=budget,
                eos_id=self.vocab.eos_id,
                temperature=temperature,
                seed=int(seed) if seed is not None else None,
            )
        text = self.vocab.decode(out_ids)
        return 200, {
            "id": f"cmpl-{uuid.uuid4().hex[:12]}",
            "object": "chat.completion",
            "model": self.model_name,
            "choices": [
                {"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}
            ],
            "usage": {
                "prompt_tokens": len(prompt_ids),
                "completion_tokens": len(out_ids),
                "total_tokens": len(prompt_ids) + len(out_ids),
            },
        }


class _Handler(BaseHTTPRequestHandler):
    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:  # noqa: N802 - http.server hook
        if self.path == "/health":
            self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": {"message": f"no route {self.path}"}})

    def do_POST(self) -> None:  # noqa: N802 - http.server hook
        if self.path.rstrip("/") != "/v1/chat/completions":
            self._reply(404, {"error": {"message": f"no route {self.path}"}})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": {"message": "request body is not valid JSON"}})
            return
        try:
            status, payload = self.server.runner.complete(body)  # type: ignore[attr-defined]
        except Exception as exc:  # surface as a structured error, never a dead socket
            status, payload = 500, {"error": {"message": f"{type(exc).__name__}: {exc}"}}
        self._reply(status, payload)

    def log_message(self, *args) -> None:
        pass


def make_server(runner: ModelRunner, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.runner = runner  # type: ignore[attr-defined]
    return server


def serve(checkpoint: str | Path, port: int, host: str = "127.0.0.1") -> None:
    """Blocking entry point used by the CLI."""
    runner = ModelRunner.from_checkpoint(checkpoint)
    try:
        server = make_server(runner, host, port)
    except OSError as exc:
        raise SystemExit(f"cannot bind {host}:{port}: {exc}")
    print(f"serving {runner.model_name} on http://{host}:{server.server_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


class ServerThread:
    """Context manager running the endpoint in-process (tests, sidecars)."""

    def __init__(self, checkpoint: str | Path, host: str = "127.0.0.1", port: int = 0):
        self.runner = ModelRunner.from_checkpoint(checkpoint)
        self.server = make_server(self.runner, host, port)
        self.base_url = f"http://{host}:{self.server.server_port}"
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self) -> "ServerThread":
        self._thread.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.server.shutdown()
        self.server.server_close()
