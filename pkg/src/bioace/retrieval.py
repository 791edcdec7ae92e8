"""Local BM25 inverted index over documents or document fragments.

The index is deliberately small-scale: it backs negative-pair mining and
top-k retrieval on desk-size corpora, not a full bibliographic baseline.
Scoring follows Okapi BM25 with the +1-inside-log IDF variant so scores
stay non-negative on tiny corpora:

    score(q, d) = sum_t IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avglen))
    IDF(t)      = ln((N - df + 0.5) / (df + 0.5) + 1)

where t ranges over the query's token occurrences (a repeated query token
contributes once per occurrence). Ties are broken by ascending doc_ref.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be non-negative")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")


def tokenize(text: str, min_token_len: int = 2) -> list[str]:
    """Lowercase, split on non-alphanumeric, drop short tokens. No stemming."""
    return [t for t in _NON_ALNUM.split(text.lower()) if len(t) >= min_token_len]


@dataclass
class InvertedIndex:
    doc_refs: list
    doc_lengths: list[int]
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc_index, tf)]
    avg_doc_length: float
    min_token_len: int = 2

    @property
    def doc_count(self) -> int:
        return len(self.doc_refs)

    def save(self, path: str | Path) -> None:
        payload = {
            "doc_refs": self.doc_refs,
            "doc_lengths": self.doc_lengths,
            "postings": {t: [list(p) for p in ps] for t, ps in self.postings.items()},
            "avg_doc_length": self.avg_doc_length,
            "min_token_len": self.min_token_len,
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            doc_refs=payload["doc_refs"],
            doc_lengths=[int(v) for v in payload["doc_lengths"]],
            postings={
                t: [(int(i), int(tf)) for i, tf in ps]
                for t, ps in payload["postings"].items()
            },
            avg_doc_length=float(payload["avg_doc_length"]),
            min_token_len=int(payload.get("min_token_len", 2)),
        )


def build_index(units, min_token_len: int = 2) -> InvertedIndex:
    """Build an index from (doc_ref, text) pairs."""
    units = list(units)
    if not units:
        raise EmptyCorpus("cannot index an empty corpus")
    doc_refs = []
    doc_lengths = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for idx, (ref, text) in enumerate(units):
        tokens = tokenize(text, min_token_len=min_token_len)
        doc_refs.append(ref)
        doc_lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((idx, tf))
    return InvertedIndex(
        doc_refs=doc_refs,
        doc_lengths=doc_lengths,
        postings=postings,
        avg_doc_length=sum(doc_lengths) / len(doc_lengths),
        min_token_len=min_token_len,
    )


def idf(index: InvertedIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def bm25_scores(query: str, index: InvertedIndex, params: Bm25Params = Bm25Params()) -> list[float]:
    """BM25 score of every document for ``query``, in doc_refs order."""
    scores = [0.0] * index.doc_count
    avg = index.avg_doc_length
    for term in tokenize(query, min_token_len=index.min_token_len):
        postings = index.postings.get(term)
        if not postings:
            continue
        w = idf(index, term)
        for doc_idx, tf in postings:
            norm = tf + params.k1 * (
                1.0 - params.b + params.b * index.doc_lengths[doc_idx] / avg
            )
            scores[doc_idx] += w * tf * (params.k1 + 1.0) / norm
    return scores


def bm25_top_k(
    query: str,
    index: InvertedIndex,
    params: Bm25Params = Bm25Params(),
    k: int = 10,
):
    """Top-k (doc_ref, score) pairs, non-increasing score, ties by doc_ref."""
    if k < 1:
        raise ValueError("k must be positive")
    scores = bm25_scores(query, index, params)
    order = sorted(range(index.doc_count), key=lambda i: (-scores[i], index.doc_refs[i]))
    return [(index.doc_refs[i], scores[i]) for i in order[:k]]
