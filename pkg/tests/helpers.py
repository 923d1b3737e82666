"""Shared test machinery: random IR documents and a scriptable fake server."""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from irpair.ir import (
    DialogueIR,
    DialogueSegment,
    DocumentIR,
    DocumentSection,
    IRDocument,
    QuestionIR,
)

_WORDS = [
    "storm", "harbor", "council", "garden", "market", "signal", "bridge",
    "window", "report", "teacher", "student", "record", "sample", "anchor",
    "valley", "meadow", "ticket", "engine", "quiet", "sudden", "formal",
    "crew", "plan", "vote", "delay", "merge", "audit", "trial",
]
_ENTITY_WORDS = ["Marwick", "Ellsworth", "Calder", "Harbor", "Northfield", "Violet", "Tobias"]


def rand_sentence(rng: random.Random, lo: int = 3, hi: int = 8) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(lo, hi))]
    words[0] = words[0].capitalize()
    return " ".join(words) + rng.choice([".", ".", ".", "?", "!"])


def rand_summary(rng: random.Random, max_sentences: int = 1) -> str:
    return " ".join(rand_sentence(rng) for _ in range(rng.randint(1, max_sentences)))


def rand_dialogue_ir(rng: random.Random, origin: str = "from_source") -> IRDocument:
    segments = tuple(
        DialogueSegment(i, rand_sentence(rng)) for i in range(1, rng.randint(1, 8) + 1)
    )
    variant = rng.choice(("sectioned", "hierarchical", "cot"))
    return IRDocument("dialogue_summ", variant, DialogueIR(segments), origin)


def rand_document_ir(rng: random.Random, origin: str = "from_source") -> IRDocument:
    n = rng.randint(3, 7) if origin == "from_source" else rng.randint(1, 9)
    sections = tuple(
        DocumentSection(
            i,
            rand_summary(rng, max_sentences=2),
            tuple(rng.sample(_ENTITY_WORDS, rng.randint(0, 3))),
        )
        for i in range(1, n + 1)
    )
    variant = rng.choice(("sectioned", "hierarchical", "cot"))
    return IRDocument("doc_summ", variant, DocumentIR(sections), origin)


def rand_question_ir(rng: random.Random, origin: str = "from_source") -> IRDocument:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(4, 9))]
    words[0] = words[0].capitalize()
    words.insert(rng.randint(1, len(words)), "[BLANK]")
    masked = " ".join(words) + "."
    bullets = tuple(rand_sentence(rng) for _ in range(rng.randint(3, 5)))
    answer = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 3)))
    variant = rng.choice(("sectioned", "hierarchical", "cot"))
    return IRDocument("question_gen", variant, QuestionIR(masked, bullets, answer), origin)


def rand_ir(rng: random.Random, task: str, variant: str, origin: str = "from_source") -> IRDocument:
    maker = {
        "dialogue_summ": rand_dialogue_ir,
        "doc_summ": rand_document_ir,
        "question_gen": rand_question_ir,
    }[task]
    doc = maker(rng, origin)
    return IRDocument(task, variant, doc.payload, origin)


# ---------------------------------------------------------------------------
# Scriptable OpenAI-compatible fake server
# ---------------------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 - http.server hook
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        status, payload = self.server.script(self, body)  # type: ignore[attr-defined]
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args) -> None:
        pass


def completion_payload(text: str, prompt_tokens: int = 5, completion_tokens: int = 7) -> dict:
    return {
        "id": "fake-123",
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


@contextmanager
def fake_server(script):
    """Serve ``script(handler, body) -> (status, payload)`` on a loopback port."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.script = script  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
