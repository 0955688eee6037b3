"""Retriever steps: local BM25, a generic remote search client, and the
gold/distractor document injector.

Step targets registered here:
    retrieval.bm25         per-record top-k search against a JSONL corpus
    retrieval.remote       per-record POST to a remote search endpoint
    retrieval.distractors  mix gold docs with sampled distractors per record
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Any

from .bm25 import RetrievedDoc, bm25_build, bm25_search, load_corpus
from .errors import ConfigError, EndpointError
from .http import HttpTransport, request_with_retries
from .pipeline import LocalStep, register_step
from .rng import Xoshiro256, derive_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Remote retrieval client


@dataclass
class RemoteRetriever:
    url: str
    api_key_env: str | None = None
    top_k: int = 5

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise ConfigError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers


def remote_retrieve(
    endpoint: RemoteRetriever,
    query: str,
    *,
    transport: HttpTransport,
    timeout: float = 30.0,
    retries: int = 3,
    backoff: float = 0.25,
) -> list[RetrievedDoc]:
    """POST {"query", "top_k"} and map {"results": [{id,text,score}...]} to docs.

    Ranks follow response order regardless of the reported scores.
    """
    resp = request_with_retries(
        transport,
        "POST",
        endpoint.url,
        headers=endpoint.headers(),
        json_body={"query": query, "top_k": endpoint.top_k},
        timeout=timeout,
        retries=retries,
        backoff=backoff,
        what="retrieval",
    )
    try:
        payload = resp.json()
        results = payload["results"]
        docs = [
            RetrievedDoc(
                doc_id=str(item["id"]),
                text=str(item["text"]),
                score=float(item.get("score", 0.0)),
                rank=rank,
                title=item.get("title"),
            )
            for rank, item in enumerate(results, start=1)
        ]
    except (ValueError, KeyError, TypeError) as exc:
        raise EndpointError(f"malformed retrieval response from {endpoint.url}: {exc}") from exc
    return docs


# ---------------------------------------------------------------------------
# Retriever steps


def _require_query(record: dict, key: str) -> str:
    if key not in record:
        raise KeyError(f"missing query field '{key}'")
    return str(record[key])


@register_step
class Bm25Retrieve(LocalStep):
    target = "retrieval.bm25"
    file_params = ("corpus_file",)

    @dataclass
    class Params:
        corpus_file: str
        query_key: str = "query"
        docs_key: str = "positive_passages"
        k: int = 5
        k1: float = 1.2
        b: float = 0.75
        on_error: str = "fail"

    def prepare(self, datasets, env):
        corpus = load_corpus(self.params.corpus_file)
        self._index = bm25_build(corpus, k1=self.params.k1, b=self.params.b)

    def transform(self, record, index):
        query = _require_query(record, self.params.query_key)
        docs = bm25_search(self._index, query, self.params.k)
        record[self.params.docs_key] = [d.as_record() for d in docs]
        return record


@register_step
class RemoteRetrieve(LocalStep):
    target = "retrieval.remote"

    @dataclass
    class Params:
        url: str
        api_key_env: str | None = None
        k: int = 5
        query_key: str = "query"
        docs_key: str = "positive_passages"
        on_error: str = "fail"

    def prepare(self, datasets, env):
        self._endpoint = RemoteRetriever(
            url=self.params.url, api_key_env=self.params.api_key_env, top_k=self.params.k
        )
        self._env = env

    def transform(self, record, index):
        query = _require_query(record, self.params.query_key)
        docs = remote_retrieve(
            self._endpoint,
            query,
            transport=self._env.get_transport(),
            timeout=self._env.timeout,
            retries=self._env.http_retries,
            backoff=self._env.http_backoff,
        )
        record[self.params.docs_key] = [d.as_record() for d in docs]
        return record


# ---------------------------------------------------------------------------
# Distractor injection


def _as_doc(value: Any) -> dict[str, Any]:
    if isinstance(value, dict):
        return value
    return {"text": str(value)}


def _doc_key(doc: dict[str, Any]) -> str:
    return str(doc.get("id")) if doc.get("id") is not None else str(doc.get("text", ""))


@register_step
class Distractors(LocalStep):
    """Replace a record's context docs by golds plus sampled distractors.

    Per record, a Bernoulli(p_gold) draw seeded with (seed, record index)
    decides whether the gold docs are kept. Kept golds come first, the
    distractor sample fills up the remaining slots, and the combined list
    is then shuffled with the same per-record stream so gold position
    carries no signal. ``gold_present`` records the draw. With
    context_size unset, the emitted list has len(golds) + num_distractors
    docs in both branches, so prompt length does not leak the draw either.
    """

    target = "retrieval.distractors"
    file_params = ("corpus_file",)

    @dataclass
    class Params:
        gold_key: str
        p_gold: float
        num_distractors: int
        seed: int
        docs_key: str = "positive_passages"
        corpus_file: str | None = None
        pool_dataset: str | None = None
        context_size: int | None = None
        on_error: str = "fail"

    def __init__(self, config):
        super().__init__(config)
        if not 0.0 <= self.params.p_gold <= 1.0:
            raise ConfigError(f"{self.target}: p_gold must be within [0, 1]")
        if (self.params.corpus_file is None) == (self.params.pool_dataset is None):
            raise ConfigError(
                f"{self.target}: configure exactly one of corpus_file or pool_dataset"
            )

    def dataset_dependencies(self):
        deps = list(self.inputs)
        if self.params.pool_dataset and self.params.pool_dataset not in deps:
            deps.append(self.params.pool_dataset)
        return deps

    def prepare(self, datasets, env):
        if self.params.corpus_file is not None:
            corpus = load_corpus(self.params.corpus_file)
            self._pool = [
                {"id": d.doc_id, **({"title": d.title} if d.title is not None else {}), "text": d.text}
                for d in corpus
            ]
        else:
            pool_ds = next(
                (d for d in datasets if d.name == self.params.pool_dataset), None
            )
            if pool_ds is None:
                raise ConfigError(f"{self.target}: pool dataset {self.params.pool_dataset!r} not found")
            self._pool = [_as_doc(r) for r in pool_ds.records]

    def transform(self, record, index):
        if self.params.gold_key not in record:
            raise KeyError(f"missing gold field '{self.params.gold_key}'")
        golds_raw = record[self.params.gold_key]
        if not isinstance(golds_raw, list):
            golds_raw = [golds_raw]
        golds = [_as_doc(g) for g in golds_raw]
        gold_keys = {_doc_key(g) for g in golds}
        pool = [d for d in self._pool if _doc_key(d) not in gold_keys]

        rng = Xoshiro256(derive_seed(self.params.seed, index))
        gold_present = rng.random() < self.params.p_gold

        total = (
            self.params.context_size
            if self.params.context_size is not None
            else len(golds) + self.params.num_distractors
        )
        kept = golds[:total] if gold_present else []
        n_distractors = total - len(kept)
        if n_distractors > len(pool):
            raise ValueError(
                f"distractor pool too small: need {n_distractors}, have {len(pool)}"
            )
        docs = kept + [dict(d) for d in rng.sample(pool, n_distractors)]
        rng.shuffle(docs)
        record[self.params.docs_key] = docs
        record["gold_present"] = gold_present
        return record
