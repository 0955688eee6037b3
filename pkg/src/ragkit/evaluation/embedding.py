"""Embedders for similarity-based metrics.

The built-in fallback is a deterministic L2-normalized bag-of-tokens
vector over a SHA-256-hashed vocabulary of fixed dimension 256, so cosine
plumbing can be tested offline with exact expected values. A remote
embedder speaks the OpenAI-style /embeddings contract.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

from ..bm25 import tokenize
from ..errors import ConfigError, EndpointError
from ..http import HttpTransport, default_transport, request_with_retries


def cosine(u: list[float], v: list[float]) -> float:
    """Cosine similarity with exact handling of the degenerate cases.

    Zero-norm vectors yield 0.0. Bit-identical vectors short-circuit to
    exactly 1.0 (by definition) before any rounding can creep in; the
    general result is clamped to [-1, 1].
    """
    if len(u) != len(v):
        raise ConfigError(f"embedding dimensions differ: {len(u)} vs {len(v)}")
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    if u == v:
        return 1.0
    dot = sum(x * y for x, y in zip(u, v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


@dataclass
class HashedBowEmbedder:
    """Deterministic token-count embedding into a fixed hashed vocabulary."""

    dim: int = 256

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in tokenize(text):
            vec[self._bucket(token)] += 1.0
        norm = math.sqrt(sum(x * x for x in vec))
        if norm:
            vec = [x / norm for x in vec]
        return vec


@dataclass
class RemoteEmbedder:
    base_url: str
    model: str
    api_key_env: str | None = None
    transport: HttpTransport | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.25

    def embed(self, text: str) -> list[float]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise ConfigError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        url = self.base_url.rstrip("/") + "/embeddings"
        resp = request_with_retries(
            self.transport or default_transport(),
            "POST",
            url,
            headers=headers,
            json_body={"model": self.model, "input": [text]},
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
            what="embedding",
        )
        try:
            return [float(x) for x in resp.json()["data"][0]["embedding"]]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"malformed embedding response from {url}: {exc}") from exc


def semantic_similarity(pred: str, golds: list[str], embedder) -> float | None:
    """Max over golds of cosine(embed(pred), embed(gold)); None on failure."""
    if not golds:
        return None
    try:
        pred_vec = embedder.embed(pred)
        return max(cosine(pred_vec, embedder.embed(g)) for g in golds)
    except (EndpointError, ConfigError):
        return None
