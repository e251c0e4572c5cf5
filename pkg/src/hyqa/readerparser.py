"""Candidate serialization, generation, and answer resolution.

The generator (remote service or built-in stub) reads a question plus
serialized candidates and emits k beam outputs, each prefixed "answer: "
or "sql: ".  SQL outputs are parsed and executed against the table store;
anything that fails to parse or execute resolves to a non-executable
(wrong) answer.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from . import sqlkit
from .corpus import TABULAR, Candidate, TableStore
from .remote import ProtocolError, post_json

PREFIX_ANSWER = "answer"
PREFIX_SQL = "sql"
PREFIX_MALFORMED = "malformed"


@dataclass
class GenerationRequest:
    question: str
    contexts: list[str]
    beam_size: int = 3
    max_context_tokens: int = 150

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not self.contexts:
            raise ValueError("contexts must be non-empty")


@dataclass(frozen=True)
class GenerationOutput:
    prefix: str
    payload: str
    beam_score: float
    beam_rank: int


@dataclass(frozen=True)
class ResolvedAnswer:
    source: str  # "direct" | "sql_execution"
    answers: list[str]
    executable: bool
    sql: sqlkit.SqlQuery | None = None


def serialize_candidate(question: str, candidate: Candidate, max_context_tokens: int = 150) -> str:
    """Marker-separated generator input; content capped at the token budget."""
    content = " ".join(candidate.content.split()[:max_context_tokens])
    if candidate.kind == TABULAR:
        return f"question: {question} [table title] {candidate.title} [table content] {content}"
    return f"question: {question} [text title] {candidate.title} [text content] {content}"


def make_targets(
    answers: list[str] | None,
    sql: str | sqlkit.SqlQuery | None,
    rng: random.Random | None = None,
) -> list[str]:
    """Prefixed training targets: one sampled answer, plus the SQL when
    annotated (two targets for questions that carry both)."""
    if not answers and sql is None:
        raise ValueError("example has neither an answer nor a SQL annotation")
    targets = []
    if answers:
        rng = rng or random.Random(0)
        targets.append(f"answer: {rng.choice(list(answers))}")
    if sql is not None:
        query = sqlkit.parse_sql(sql) if isinstance(sql, str) else sql
        targets.append(f"sql: {sqlkit.render_sql(query)}")
    return targets


def classify_output(text: str) -> tuple[str, str]:
    """Split a raw generation into (prefix, payload); total over strings."""
    if text.startswith("answer: "):
        return PREFIX_ANSWER, text[len("answer: ") :]
    if text.startswith("sql: "):
        return PREFIX_SQL, text[len("sql: ") :]
    return PREFIX_MALFORMED, text


def generate(request: GenerationRequest, generator) -> list[GenerationOutput]:
    """Run the generator and classify its beams.

    Exactly ``beam_size`` outputs are required; they are ordered by
    non-increasing score and ranked 1..k.
    """
    raw = generator.generate(request.question, request.contexts, request.beam_size)
    if len(raw) != request.beam_size:
        raise ProtocolError(
            f"generator returned {len(raw)} outputs, expected {request.beam_size}"
        )
    ordered = sorted(raw, key=lambda pair: -pair[1])
    outputs = []
    for rank, (text, score) in enumerate(ordered, start=1):
        prefix, payload = classify_output(text)
        outputs.append(
            GenerationOutput(prefix=prefix, payload=payload, beam_score=float(score), beam_rank=rank)
        )
    return outputs


def resolve_outputs(outputs: list[GenerationOutput], store: TableStore) -> list[ResolvedAnswer]:
    """Resolve each output to final answers, executing SQL outputs.

    Parse or execution failures (and malformed outputs) yield an empty,
    non-executable answer, which evaluation counts as wrong.
    """
    resolved = []
    for output in outputs:
        if output.prefix == PREFIX_ANSWER:
            resolved.append(ResolvedAnswer("direct", [output.payload], True))
            continue
        if output.prefix == PREFIX_SQL:
            query = None
            try:
                query = sqlkit.parse_sql(output.payload)
                result = sqlkit.execute(query, store)
            except (sqlkit.ParseError, sqlkit.ExecutionError):
                resolved.append(ResolvedAnswer("sql_execution", [], False, query))
                continue
            resolved.append(ResolvedAnswer("sql_execution", result.values, True, query))
            continue
        resolved.append(ResolvedAnswer("sql_execution", [], False))
    return resolved


class FixtureGenerator:
    """Replays canned outputs per question from a JSONL fixtures file.

    Each line: {"question": ..., "outputs": [{"text": ..., "score": ...}]}.
    """

    def __init__(self, path):
        self.by_question = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                self.by_question[record["question"]] = [
                    (o["text"], float(o["score"])) for o in record["outputs"]
                ]

    def generate(self, question, contexts, beam_size):
        if question not in self.by_question:
            raise ProtocolError(f"no fixture outputs for question: {question!r}")
        return self.by_question[question][:beam_size]


class ConstantGenerator:
    """Emits the same text on every beam with strictly decreasing scores."""

    def __init__(self, text: str):
        self.text = text

    def generate(self, question, contexts, beam_size):
        return [(self.text, -float(i)) for i in range(beam_size)]


class FirstCandidateGenerator:
    """Copies the first candidate's content as a direct answer."""

    def __init__(self, max_tokens: int = 20):
        self.max_tokens = max_tokens

    def generate(self, question, contexts, beam_size):
        content = contexts[0]
        for marker in ("[text content] ", "[table content] "):
            at = content.find(marker)
            if at >= 0:
                content = content[at + len(marker) :]
                break
        payload = " ".join(content.split()[: self.max_tokens])
        return [(f"answer: {payload}", -float(i)) for i in range(beam_size)]


class RemoteGenerator:
    """Client for the POST /generate wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 300.0):
        self.url = endpoint.rstrip("/") + "/generate"
        self.timeout = timeout

    def generate(self, question, contexts, beam_size):
        payload = {"question": question, "contexts": list(contexts), "beam_size": beam_size}
        body = post_json(self.url, payload, timeout=self.timeout)
        outputs = body.get("outputs")
        if not isinstance(outputs, list) or len(outputs) != beam_size:
            raise ProtocolError(
                f"generator returned {0 if not isinstance(outputs, list) else len(outputs)}"
                f" outputs, expected {beam_size}"
            )
        return [(str(o["text"]), float(o["score"])) for o in outputs]


def make_generator(spec: str, fixtures_dir=None):
    """Build a generator from a CLI spec string.

    "stub:FILE" replays fixtures, "constant:TEXT" repeats TEXT, "copy"
    copies the first candidate, and an http(s) URL talks to a service.
    """
    if spec.startswith("stub:"):
        return FixtureGenerator(spec[len("stub:") :])
    if spec.startswith("constant:"):
        return ConstantGenerator(spec[len("constant:") :])
    if spec == "copy":
        return FirstCandidateGenerator()
    if spec.startswith("http://") or spec.startswith("https://"):
        return RemoteGenerator(spec)
    raise ValueError(f"unknown generator spec: {spec!r}")


def write_predictions(path, predictions: dict[str, list[GenerationOutput]]) -> None:
    """Predictions file: {"qid", "outputs": [{prefix, payload, beam_score}]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid in predictions:
            record = {
                "qid": qid,
                "outputs": [
                    {"prefix": o.prefix, "payload": o.payload, "beam_score": o.beam_score}
                    for o in sorted(predictions[qid], key=lambda o: o.beam_rank)
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_predictions(path) -> dict[str, list[GenerationOutput]]:
    predictions: dict[str, list[GenerationOutput]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            outputs = [
                GenerationOutput(
                    prefix=o["prefix"],
                    payload=o["payload"],
                    beam_score=float(o["beam_score"]),
                    beam_rank=rank,
                )
                for rank, o in enumerate(record["outputs"], start=1)
            ]
            predictions[record["qid"]] = outputs
    return predictions
