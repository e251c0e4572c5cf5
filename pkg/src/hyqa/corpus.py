"""Corpus ingestion: word-budgeted text passages and flattened table chunks.

Raw articles are split into passages of at most ``max_words`` whitespace
tokens.  Tables are flattened into ``[header] h1 ; h2 [row] v1 ; v2 ...``
chunks that repeat the full header and never split a row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

TEXTUAL = "textual"
TABULAR = "tabular"

COLUMN_TYPES = ("text", "real")


class IngestError(ValueError):
    """A corpus file failed validation."""


@dataclass(frozen=True)
class TextPassage:
    id: str
    title: str
    content: str
    source_doc: str


@dataclass(frozen=True)
class Table:
    id: str
    header: list[str]
    column_types: list[str]
    rows: list[list]

    @property
    def title(self) -> str:
        # Tables are titled by their id so a generator can copy it into SQL.
        return self.id


@dataclass(frozen=True)
class TabularPassage:
    id: str
    table_id: str
    content: str
    row_span: tuple[int, int]  # half-open [first, last)


@dataclass(frozen=True)
class Candidate:
    """Uniform view of a retrievable evidence unit, textual or tabular."""

    id: str
    kind: str
    title: str
    content: str


def stringify_cell(value) -> str:
    """Render a table cell as text; integral floats drop the trailing .0."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else str(value)
    if value is None:
        return ""
    return str(value)


def split_passage(
    text: str,
    title: str,
    max_words: int = 100,
    overlap: int = 0,
    source_doc: str | None = None,
) -> list[TextPassage]:
    """Split ``text`` into passages of at most ``max_words`` whitespace tokens.

    Consecutive passages share ``overlap`` words.  With overlap=0 the
    passages partition the word sequence.
    """
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")
    if not 0 <= overlap < max_words:
        raise ValueError(f"overlap must be in [0, max_words), got {overlap}")
    words = text.split()
    if not words:
        return []
    source = source_doc if source_doc is not None else title
    stride = max_words - overlap
    passages = []
    start = 0
    while True:
        chunk = words[start : start + max_words]
        passages.append(
            TextPassage(
                id=f"{source}:{len(passages)}",
                title=title,
                content=" ".join(chunk),
                source_doc=source,
            )
        )
        if start + max_words >= len(words):
            break
        start += stride
    return passages


def _header_block(table: Table) -> str:
    return "[header] " + " ; ".join(table.header)


def _row_block(row: list) -> str:
    return "[row] " + " ; ".join(stringify_cell(v) for v in row)


def flatten_table(table: Table, max_words: int = 100) -> list[TabularPassage]:
    """Flatten a table into header-prefixed chunks of at most ``max_words`` words.

    Every chunk starts with the full header block and holds the maximal
    prefix of remaining rows keeping the chunk within budget.  Rows are
    never split: a row that cannot fit even alone becomes its own
    over-budget chunk.
    """
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")
    header = _header_block(table)
    header_words = len(header.split())
    if not table.rows:
        return [TabularPassage(id=f"{table.id}:0", table_id=table.id, content=header, row_span=(0, 0))]
    chunks = []
    r = 0
    n = len(table.rows)
    while r < n:
        first = r
        parts = [header]
        words = header_words
        seg = _row_block(table.rows[r])
        parts.append(seg)
        words += len(seg.split())
        r += 1
        while r < n:
            seg = _row_block(table.rows[r])
            seg_words = len(seg.split())
            if words + seg_words > max_words:
                break
            parts.append(seg)
            words += seg_words
            r += 1
        chunks.append(
            TabularPassage(
                id=f"{table.id}:{len(chunks)}",
                table_id=table.id,
                content=" ".join(parts),
                row_span=(first, r),
            )
        )
    return chunks


class PassageCorpus:
    """Immutable collection of candidates of one kind, unique by id."""

    def __init__(self, kind: str, candidates: list[Candidate]):
        if kind not in (TEXTUAL, TABULAR):
            raise ValueError(f"unknown corpus kind: {kind}")
        self.kind = kind
        self.candidates = list(candidates)
        self.by_id = {}
        for cand in self.candidates:
            if cand.id in self.by_id:
                raise IngestError(f"duplicate passage id: {cand.id}")
            self.by_id[cand.id] = cand

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


class TableStore:
    """Immutable id -> Table mapping; the execution substrate for SQL."""

    def __init__(self, tables: list[Table]):
        self.by_id: dict[str, Table] = {}
        for table in tables:
            if table.id in self.by_id:
                raise IngestError(f"duplicate table id: {table.id}")
            self.by_id[table.id] = table

    def __len__(self) -> int:
        return len(self.by_id)

    def __contains__(self, table_id: str) -> bool:
        return table_id in self.by_id

    def get(self, table_id: str) -> Table | None:
        return self.by_id.get(table_id)

    def tables(self) -> list[Table]:
        return list(self.by_id.values())


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise IngestError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _require(record: dict, key: str, path, lineno: int):
    if key not in record:
        raise IngestError(f"{path}:{lineno}: missing field {key!r}")
    return record[key]


def load_passages(path, kind: str = TEXTUAL) -> PassageCorpus:
    """Load a passages file (one JSON object per line) into a corpus.

    Schema: {"id", "title", "content", "source_doc"}.  For tabular corpora
    the title is the table id and the content is the flattened chunk.
    """
    candidates = []
    seen = set()
    for lineno, record in _read_jsonl(path):
        pid = _require(record, "id", path, lineno)
        title = _require(record, "title", path, lineno)
        content = _require(record, "content", path, lineno)
        if not isinstance(pid, str) or not pid:
            raise IngestError(f"{path}:{lineno}: id must be a non-empty string")
        if pid in seen:
            raise IngestError(f"duplicate passage id: {pid}")
        seen.add(pid)
        candidates.append(Candidate(id=pid, kind=kind, title=str(title), content=str(content)))
    return PassageCorpus(kind, candidates)


def load_tables(path) -> TableStore:
    """Load a tables file: {"id", "header", "types", "rows"} per line."""
    tables = []
    seen = set()
    for lineno, record in _read_jsonl(path):
        tid = _require(record, "id", path, lineno)
        header = _require(record, "header", path, lineno)
        rows = _require(record, "rows", path, lineno)
        types = record.get("types")
        if not isinstance(tid, str) or not tid:
            raise IngestError(f"{path}:{lineno}: id must be a non-empty string")
        if tid in seen:
            raise IngestError(f"duplicate table id: {tid}")
        seen.add(tid)
        if not isinstance(header, list) or not header or any(not str(h) for h in header):
            raise IngestError(f"{path}:{lineno}: header must be a non-empty list of names")
        if types is None:
            types = ["text"] * len(header)
        if len(types) != len(header) or any(t not in COLUMN_TYPES for t in types):
            raise IngestError(f"{path}:{lineno}: types must match header and be text|real")
        if not isinstance(rows, list):
            raise IngestError(f"{path}:{lineno}: rows must be a list")
        for row in rows:
            if not isinstance(row, list) or len(row) != len(header):
                raise IngestError(
                    f"{path}:{lineno}: table {tid}: row length {len(row) if isinstance(row, list) else '?'}"
                    f" != header length {len(header)}"
                )
        tables.append(Table(id=tid, header=[str(h) for h in header], column_types=list(types), rows=rows))
    return TableStore(tables)


def ingest(path, kind: str):
    """Load a corpus file; ``kind`` is "text" (passages) or "tables"."""
    if kind == "text":
        return load_passages(path, TEXTUAL)
    if kind == "tables":
        return load_tables(path)
    raise ValueError(f"unknown ingest kind: {kind}")


def passage_record(passage) -> dict:
    """Passages-file record for a TextPassage or TabularPassage."""
    if isinstance(passage, TabularPassage):
        return {
            "id": passage.id,
            "title": passage.table_id,
            "content": passage.content,
            "source_doc": passage.table_id,
        }
    return {
        "id": passage.id,
        "title": passage.title,
        "content": passage.content,
        "source_doc": passage.source_doc,
    }


def write_passages(path, passages) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for passage in passages:
            fh.write(json.dumps(passage_record(passage), ensure_ascii=False, sort_keys=True) + "\n")
