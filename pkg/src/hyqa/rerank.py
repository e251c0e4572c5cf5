"""Joint reranking of textual and tabular candidates.

A scorer assigns each candidate a relevance score in [0, 1]; the top
candidates are then taken from the joint pool regardless of kind.  The
binary cross-entropy loss and the 1-positive / 63-negative batch sampler
feed reranker training; weak supervision labels a candidate positive when
a normalized gold answer occurs in its normalized content.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .corpus import TEXTUAL, Candidate
from .evalkit import normalize_answer
from .remote import ProtocolError, post_json
from .retrieval import analyze

POSITIVE = "pos"
NEGATIVE = "neg"

LOSS_EPS = 1e-12


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_id: str
    kind: str
    score: float


@dataclass(frozen=True)
class TrainingBatch:
    question_id: str
    positives: list[str]
    negatives: list[str]


def build_rerank_input(question: str, candidate: Candidate) -> str:
    return f"[question] {question} [title] {candidate.title} [content] {candidate.content}"


def reranker_loss(scores: list[float], labels: list[str]) -> float:
    """Binary cross-entropy over positives and negatives.

    Scores exactly 0 or 1 are clamped to [eps, 1-eps] so the loss stays
    finite.
    """
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores for {len(labels)} labels")
    loss = 0.0
    for score, label in zip(scores, labels):
        clamped = min(max(score, LOSS_EPS), 1.0 - LOSS_EPS)
        if label == POSITIVE:
            loss -= math.log(clamped)
        elif label == NEGATIVE:
            loss -= math.log(1.0 - clamped)
        else:
            raise ValueError(f"unknown label: {label!r}")
    return loss


def label_candidates(
    candidates: list[Candidate], gold_answers: list[str]
) -> list[tuple[Candidate, str]]:
    """Weak supervision: positive iff a normalized gold answer is a
    substring of the normalized candidate content."""
    if not gold_answers:
        raise ValueError("gold answers must be non-empty")
    norm_golds = [g for g in (normalize_answer(a) for a in gold_answers) if g]
    labeled = []
    for cand in candidates:
        content = normalize_answer(cand.content)
        label = POSITIVE if any(g in content for g in norm_golds) else NEGATIVE
        labeled.append((cand, label))
    return labeled


def sample_training_batch(
    question_id: str,
    labeled: list[tuple[Candidate, str]],
    n_pos: int = 1,
    n_neg: int = 63,
    seed: int = 0,
) -> TrainingBatch | None:
    """Sample positives and negatives without replacement; None skips the
    question when it has no positive candidate.  Pools smaller than the
    requested counts are used whole."""
    positives = [c.id for c, label in labeled if label == POSITIVE]
    negatives = [c.id for c, label in labeled if label == NEGATIVE]
    if not positives:
        return None
    rng = random.Random(seed)
    return TrainingBatch(
        question_id=question_id,
        positives=rng.sample(positives, min(n_pos, len(positives))),
        negatives=rng.sample(negatives, min(n_neg, len(negatives))),
    )


def lexical_score(question: str, candidate: Candidate) -> float:
    """Fraction of distinct question terms found in the candidate."""
    q_terms = set(analyze(question))
    if not q_terms:
        return 0.0
    c_terms = set(analyze(candidate.title + " " + candidate.content))
    return len(q_terms & c_terms) / len(q_terms)


class LexicalScorer:
    """Deterministic model-free scorer used as the built-in fallback."""

    def score(self, question: str, candidates: list[Candidate]) -> list[float]:
        return [lexical_score(question, c) for c in candidates]


class RemoteScorer:
    """Client for the POST /score wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.url = endpoint.rstrip("/") + "/score"
        self.timeout = timeout

    def score(self, question: str, candidates: list[Candidate]) -> list[float]:
        payload = {
            "pairs": [
                {"question": question, "title": c.title, "content": c.content}
                for c in candidates
            ]
        }
        body = post_json(self.url, payload, timeout=self.timeout)
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise ProtocolError(
                f"scorer returned {0 if not isinstance(scores, list) else len(scores)}"
                f" scores for {len(candidates)} pairs"
            )
        values = [float(s) for s in scores]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ProtocolError("scorer returned a score outside [0, 1]")
        return values


def score_candidates(
    question: str, candidates: list[Candidate], scorer
) -> list[ScoredCandidate]:
    """One score per candidate, input order preserved."""
    scores = scorer.score(question, candidates)
    return [
        ScoredCandidate(candidate_id=c.id, kind=c.kind, score=s)
        for c, s in zip(candidates, scores)
    ]


def select_top_joint(
    textual: list[ScoredCandidate], tabular: list[ScoredCandidate], n: int = 50
) -> list[ScoredCandidate]:
    """Top n of the joint pool by score; ties go textual-first, then by id."""
    pool = list(textual) + list(tabular)
    pool.sort(key=lambda c: (-c.score, c.kind != TEXTUAL, c.candidate_id))
    return pool[:n]
