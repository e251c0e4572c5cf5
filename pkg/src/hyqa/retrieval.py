"""BM25 inverted-index retrieval over passage corpora.

One index per corpus kind (textual, tabular).  Documents are indexed over
title + content.  The scoring function uses the non-negative idf
ln(1 + (N - df + 0.5) / (df + 0.5)) with term-frequency saturation k1 and
length normalization b.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def analyze(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character.

    No stemming, no stopwords; underscores separate tokens.
    """
    return _TOKEN.findall(text.lower())


@dataclass
class Index:
    kind: str
    k1: float = 1.2
    b: float = 0.75
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    doc_count: int = 0
    avg_doc_len: float = 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


@dataclass(frozen=True)
class RetrievedCandidate:
    candidate_id: str
    kind: str
    score: float
    rank: int


def build_index(corpus, k1: float = 1.2, b: float = 0.75) -> Index:
    """Build an immutable BM25 index from a passage corpus."""
    if len(corpus) == 0:
        raise ValueError("cannot build an index from an empty corpus")
    index = Index(kind=corpus.kind, k1=k1, b=b)
    accum: dict[str, dict[str, int]] = {}
    for cand in corpus:
        terms = analyze(cand.title + " " + cand.content)
        index.doc_lengths[cand.id] = len(terms)
        for term, tf in Counter(terms).items():
            accum.setdefault(term, {})[cand.id] = tf
    index.doc_count = len(index.doc_lengths)
    index.avg_doc_len = sum(index.doc_lengths.values()) / index.doc_count
    for term in sorted(accum):
        index.postings[term] = sorted(accum[term].items())
    return index


def _term_weight(index: Index, tf: int, doc_len: int) -> float:
    norm = index.k1 * (1.0 - index.b + index.b * doc_len / index.avg_doc_len)
    return tf * (index.k1 + 1.0) / (tf + norm)


def bm25_score(query_terms: list[str], doc_id: str, index: Index) -> float:
    """Score one document; terms absent from the document contribute 0.

    Repeated query terms contribute once per occurrence (the score is
    additive over the query term multiset).
    """
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc id: {doc_id}")
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = 0
        for did, freq in plist:
            if did == doc_id:
                tf = freq
                break
        if tf == 0:
            continue
        score += index.idf(term) * _term_weight(index, tf, doc_len)
    return score


def retrieve(question: str, index: Index, k: int = 100) -> list[RetrievedCandidate]:
    """Top-k documents by BM25 score; ties broken by ascending doc id.

    Documents matching no query term are never returned, so fewer than k
    candidates may come back.
    """
    scores: dict[str, float] = {}
    for term in analyze(question):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * _term_weight(
                index, tf, index.doc_lengths[doc_id]
            )
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    out = []
    for doc_id, score in ranked[:k]:
        if score <= 0.0:
            break
        out.append(RetrievedCandidate(doc_id, index.kind, score, len(out) + 1))
    return out


def save_index(index: Index, path) -> None:
    snapshot = {
        "kind": index.kind,
        "k1": index.k1,
        "b": index.b,
        "doc_count": index.doc_count,
        "avg_doc_len": index.avg_doc_len,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, f] for d, f in plist] for t, plist in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, ensure_ascii=False, sort_keys=True)


def load_index(path) -> Index:
    with open(path, encoding="utf-8") as fh:
        snapshot = json.load(fh)
    return Index(
        kind=snapshot["kind"],
        k1=snapshot["k1"],
        b=snapshot["b"],
        postings={t: [(d, f) for d, f in plist] for t, plist in snapshot["postings"].items()},
        doc_lengths=snapshot["doc_lengths"],
        doc_count=snapshot["doc_count"],
        avg_doc_len=snapshot["avg_doc_len"],
    )


def write_run(path, run: dict[str, list[RetrievedCandidate]]) -> None:
    """Write a run file: one "qid candidate_id rank score kind" line per row."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid in run:
            for cand in run[qid]:
                fh.write(f"{qid} {cand.candidate_id} {cand.rank} {cand.score:.6f} {cand.kind}\n")


def read_run(path) -> dict[str, list[RetrievedCandidate]]:
    run: dict[str, list[RetrievedCandidate]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            qid, cid, rank, score, kind = parts
            run.setdefault(qid, []).append(RetrievedCandidate(cid, kind, float(score), int(rank)))
    for qid in run:
        run[qid].sort(key=lambda c: c.rank)
    return run
