"""In-process BM25 lexical index for self-contained retrieval.

Scoring uses the non-negative idf variant
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
with term-frequency saturation
    tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
summed over query tokens (repeated tokens contribute once per
occurrence). Tokenization is Unicode lowercase split on non-alphanumeric
characters with empty tokens dropped; no stemming, no stopwords.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .data import read_jsonl
from .errors import ConfigError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class CorpusDoc:
    doc_id: str
    text: str
    title: str | None = None


def load_corpus(path: str | Path) -> list[CorpusDoc]:
    """Read a corpus JSONL file with fields id, text, and optional title."""
    docs = []
    seen = set()
    for i, rec in enumerate(read_jsonl(path)):
        doc_id = rec.get("id")
        text = rec.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise ConfigError(f"{path}: line {i + 1}: corpus doc needs a string 'id'")
        if doc_id in seen:
            raise ConfigError(f"{path}: duplicate doc id {doc_id!r}")
        if not isinstance(text, str) or not text:
            raise ConfigError(f"{path}: line {i + 1}: corpus doc needs non-empty 'text'")
        seen.add(doc_id)
        docs.append(CorpusDoc(doc_id=doc_id, text=text, title=rec.get("title")))
    return docs


@dataclass
class RetrievedDoc:
    doc_id: str
    text: str
    score: float
    rank: int
    title: str | None = None

    def as_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"id": self.doc_id}
        if self.title is not None:
            rec["title"] = self.title
        rec.update({"text": self.text, "score": self.score, "rank": self.rank})
        return rec


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]
    doc_lens: list[int]
    avgdl: float
    n_docs: int
    k1: float
    b: float
    docs: list[CorpusDoc] = field(repr=False)


def bm25_build(corpus: Sequence[CorpusDoc], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    if not corpus:
        raise ConfigError("cannot build a BM25 index over an empty corpus")
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lens = []
    for ordinal, doc in enumerate(corpus):
        tokens = tokenize(doc.text)
        doc_lens.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((ordinal, tf))
    avgdl = sum(doc_lens) / len(doc_lens)
    return Bm25Index(
        postings=postings,
        doc_lens=doc_lens,
        avgdl=avgdl,
        n_docs=len(corpus),
        k1=k1,
        b=b,
        docs=list(corpus),
    )


def bm25_idf(index: Bm25Index, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def bm25_search(index: Bm25Index, query: str, k: int) -> list[RetrievedDoc]:
    """Top-k docs by score descending, ties broken by ascending ordinal.

    Docs sharing no query term are returned only when fewer than k docs
    score positive; they then fill the tail in ordinal order at score 0.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    qtokens = tokenize(query)
    if not qtokens:
        return []
    scores = [0.0] * index.n_docs
    matched = [False] * index.n_docs
    for term in qtokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = bm25_idf(index, term)
        for ordinal, tf in plist:
            dl = index.doc_lens[ordinal]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
            scores[ordinal] += idf * tf * (index.k1 + 1.0) / denom
            matched[ordinal] = True

    positive = sorted(
        (i for i in range(index.n_docs) if matched[i]), key=lambda i: (-scores[i], i)
    )
    chosen = positive[:k]
    if len(chosen) < k:
        filler = (i for i in range(index.n_docs) if not matched[i])
        for i in filler:
            if len(chosen) >= k:
                break
            chosen.append(i)

    results = []
    for rank, ordinal in enumerate(chosen, start=1):
        doc = index.docs[ordinal]
        results.append(
            RetrievedDoc(
                doc_id=doc.doc_id,
                text=doc.text,
                score=scores[ordinal],
                rank=rank,
                title=doc.title,
            )
        )
    return results
