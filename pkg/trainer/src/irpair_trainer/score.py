"""Optional pair-similarity hook (embedding-style scoring).

The built-in embedder hashes word unigrams and character trigrams into a
fixed-width count vector and scores cosine similarity, so it needs no
downloaded weights and stays deterministic. A sentence-transformers model
can be plugged in via ``sentence-transformers:<model-or-path>``; when that
model cannot load, the hook reports itself disabled instead of failing the
pipeline. Primary evaluation never depends on this module.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

_WORD_RE = re.compile(r"[a-z0-9']+")
_DIM = 512


class ScoreError(ValueError):
    pass


@dataclass
class ScoreOutcome:
    status: str  # "ok" | "hook disabled"
    scored: int = 0
    detail: str = ""


def _features(text: str) -> list[str]:
    words = _WORD_RE.findall(text.lower())
    feats = list(words)
    joined = " ".join(words)
    feats.extend(joined[i : i + 3] for i in range(len(joined) - 2))
    return feats


def _hash_vector(text: str) -> list[float]:
    vec = [0.0] * _DIM
    for feat in _features(text):
        digest = hashlib.blake2s(feat.encode("utf-8"), digest_size=4).digest()
        vec[int.from_bytes(digest, "little") % _DIM] += 1.0
    return vec


def builtin_similarity(a: str, b: str) -> float:
    va, vb = _hash_vector(a), _hash_vector(b)
    dot = sum(x * y for x, y in zip(va, vb))
    norm = math.sqrt(sum(x * x for x in va)) * math.sqrt(sum(y * y for y in vb))
    if norm == 0:
        return 1.0 if a.strip() == b.strip() else 0.0
    return max(0.0, min(1.0, dot / norm))


def _load_embedder(spec: str):
    if spec == "builtin-hash":
        return builtin_similarity
    if spec.startswith("sentence-transformers:"):
        model_id = spec.split(":", 1)[1]
        try:
            from sentence_transformers import SentenceTransformer

            model = SentenceTransformer(model_id)
        except Exception as exc:
            raise ScoreError(f"embedding model {model_id!r} unavailable: {exc}") from exc

        def similarity(a: str, b: str) -> float:
            ea, eb = model.encode([a, b], normalize_embeddings=True)
            return max(0.0, min(1.0, float((ea * eb).sum())))

        return similarity
    raise ScoreError(f"unknown embedder spec {spec!r}")


def _pair_texts(row: dict) -> tuple[str, str]:
    if "text_a" in row and "text_b" in row:
        return row["text_a"], row["text_b"]
    if "synthetic_source" in row and "target" in row:
        return row["synthetic_source"], row["target"]["text"]
    raise ScoreError(f"row {row.get('id') or row.get('pair_id')!r} has no scoreable text pair")


def score_pairs(
    pairs_file: str | Path, out_file: str | Path, embedder: str = "builtin-hash"
) -> ScoreOutcome:
    """Score each pair's similarity in [0, 1]; disabled cleanly when the model is missing."""
    try:
        similarity = _load_embedder(embedder)
    except ScoreError as exc:
        return ScoreOutcome(status="hook disabled", detail=str(exc))
    pairs_file = Path(pairs_file)
    if not pairs_file.exists():
        raise ScoreError(f"pairs file not found: {pairs_file}")
    rows = [json.loads(line) for line in pairs_file.read_text(encoding="utf-8").splitlines() if line.strip()]
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for row in rows:
            a, b = _pair_texts(row)
            handle.write(
                json.dumps(
                    {
                        "id": row.get("id") or row.get("pair_id"),
                        "similarity": round(similarity(a, b), 6),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return ScoreOutcome(status="ok", scored=len(rows))
