"""Parse, render, canonicalize, and execute a single-table SQL sublanguage.

Grammar: SELECT [AGG(]column[)] FROM table_id [WHERE col OP value
(AND col OP value)*] with AGG in {COUNT, MIN, MAX, SUM, AVG} and OP in
{=, <, >}.  Column names are unquoted and may contain spaces, digits,
parentheses, or slashes; they extend greedily up to the FROM keyword
(select column) or the comparison operator (condition columns).  Values
are double-quoted strings or bare numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import TableStore, stringify_cell

AGGREGATES = ("COUNT", "MIN", "MAX", "SUM", "AVG")
OPERATORS = ("=", "<", ">")


class ParseError(ValueError):
    """Unparseable SQL text; carries the character position of the failure."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExecutionError(Exception):
    """The query references an unknown table or column."""


@dataclass
class Condition:
    column: str
    op: str
    value: str | int | float


@dataclass
class SqlQuery:
    aggregate: str | None
    select_column: str
    table_id: str
    conditions: list[Condition] = field(default_factory=list)


@dataclass
class ExecResult:
    values: list[str]


_AGG_CALL = re.compile(r"(COUNT|MIN|MAX|SUM|AVG)\((.*)$", re.IGNORECASE | re.DOTALL)
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)")
_GROUPED_NUMBER = re.compile(r"[+-]?\d{1,3}(,\d{3})+(\.\d+)?")


def _token_spans(text: str, word: str) -> list[tuple[int, int]]:
    """Spans of a keyword token outside double quotes, case-insensitive."""
    spans = []
    for match in re.finditer(rf"\b{word}\b", text, re.IGNORECASE):
        if text.count('"', 0, match.start()) % 2 == 0:
            spans.append(match.span())
    return spans


def _find_outside_quotes(text: str, chars: str, start: int = 0) -> int:
    in_quotes = False
    for i in range(start, len(text)):
        ch = text[i]
        if ch == '"':
            in_quotes = not in_quotes
        elif not in_quotes and ch in chars:
            return i
    return -1


def _parse_value(text: str, position: int):
    text = text.strip()
    if not text:
        raise ParseError("missing condition value", position)
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ParseError("unterminated string value", position)
        inner = text[1:-1]
        if '"' in inner:
            raise ParseError("stray quote in string value", position)
        return inner
    if _NUMBER.fullmatch(text):
        return float(text) if "." in text else int(text)
    raise ParseError(f"expected quoted string or number, got {text!r}", position)


def _parse_condition(text: str, position: int) -> Condition:
    op_at = _find_outside_quotes(text, "=<>")
    if op_at < 0:
        raise ParseError("condition has no comparison operator", position)
    column = text[:op_at].strip()
    if not column:
        raise ParseError("condition has no column name", position)
    if '"' in column:
        raise ParseError("quote in column name", position)
    value = _parse_value(text[op_at + 1 :], position + op_at + 1)
    return Condition(column=column, op=text[op_at], value=value)


def _parse_conditions(text: str, position: int) -> list[Condition]:
    seps = _token_spans(text, "AND")
    bounds = [0]
    for s, e in seps:
        bounds.extend([s, e])
    bounds.append(len(text))
    segments = [(bounds[i], bounds[i + 1]) for i in range(0, len(bounds), 2)]
    # A segment without an operator is a column name containing "and";
    # merge it into the following segment to restore the original text.
    merged: list[tuple[int, int]] = []
    for seg in segments:
        if merged and _find_outside_quotes(text[merged[-1][0] : merged[-1][1]], "=<>") < 0:
            merged[-1] = (merged[-1][0], seg[1])
        else:
            merged.append(seg)
    conditions = []
    for s, e in merged:
        segment = text[s:e]
        if not segment.strip():
            raise ParseError("empty condition", position + s)
        conditions.append(_parse_condition(segment, position + s))
    return conditions


def _parse_select(text: str, position: int) -> tuple[str | None, str]:
    match = _AGG_CALL.match(text)
    if match:
        inner = match.group(2)
        if not inner.endswith(")"):
            raise ParseError("unterminated aggregate call", position + len(text))
        column = inner[:-1].strip()
        if not column:
            raise ParseError("aggregate call has no column", position)
        return match.group(1).upper(), column
    if '"' in text:
        raise ParseError("quote in select column", position)
    return None, text


def parse_sql(text: str) -> SqlQuery:
    """Parse a query; raises ParseError on anything outside the grammar."""
    s = text.strip()
    if s.lower().startswith("sql:"):
        s = s[4:].lstrip()
    select = re.match(r"SELECT\s+", s, re.IGNORECASE)
    if not select:
        raise ParseError("expected SELECT", 0)
    sel_end = select.end()
    from_spans = _token_spans(s, "FROM")
    failure: ParseError | None = None
    # Greedy select column: prefer the rightmost FROM that yields a valid
    # table id and, if anything follows, a well-formed WHERE clause.
    for from_start, from_end in reversed(from_spans):
        if from_start <= sel_end:
            continue
        select_part = s[sel_end:from_start].strip()
        if not select_part:
            continue
        tail = s[from_end:].strip()
        tail_pos = from_end + (len(s[from_end:]) - len(s[from_end:].lstrip()))
        table_match = re.match(r"(\S+)(\s+(.*))?$", tail, re.DOTALL)
        if not table_match:
            failure = failure or ParseError("missing table id", tail_pos)
            continue
        table_id = table_match.group(1)
        remainder = (table_match.group(3) or "").strip()
        try:
            if remainder:
                where = re.match(r"WHERE\s+", remainder, re.IGNORECASE)
                if not where:
                    raise ParseError("expected WHERE after table id", tail_pos + len(table_id))
                where_pos = s.index(remainder, tail_pos) + where.end()
                conditions = _parse_conditions(remainder[where.end() :], where_pos)
            else:
                conditions = []
            aggregate, column = _parse_select(select_part, sel_end)
        except ParseError as exc:
            failure = exc
            continue
        return SqlQuery(
            aggregate=aggregate,
            select_column=column,
            table_id=table_id,
            conditions=conditions,
        )
    raise failure or ParseError("expected FROM", sel_end)


def _format_value(value) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    return str(value)


def render_sql(query: SqlQuery) -> str:
    """Canonical spelling; parse_sql(render_sql(q)) reproduces the AST."""
    if query.aggregate:
        select = f"{query.aggregate}({query.select_column})"
    else:
        select = query.select_column
    text = f"SELECT {select} FROM {query.table_id}"
    if query.conditions:
        clauses = " AND ".join(
            f"{c.column} {c.op} {_format_value(c.value)}" for c in query.conditions
        )
        text += f" WHERE {clauses}"
    return text


def canonicalize(query: SqlQuery) -> SqlQuery:
    """Equality-normal form: lowercased names/strings, sorted conditions."""
    conditions = [
        Condition(
            column=c.column.strip().lower(),
            op=c.op,
            value=c.value.strip().lower() if isinstance(c.value, str) else c.value,
        )
        for c in query.conditions
    ]
    conditions.sort(key=lambda c: (c.column, c.op, str(c.value)))
    return SqlQuery(
        aggregate=query.aggregate.upper() if query.aggregate else None,
        select_column=query.select_column.strip().lower(),
        table_id=query.table_id.strip(),
        conditions=conditions,
    )


def coerce_number(value) -> float | None:
    """Numeric view of a cell or literal; accepts comma-grouped digits."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if _NUMBER.fullmatch(text):
        return float(text)
    if _GROUPED_NUMBER.fullmatch(text):
        return float(text.replace(",", ""))
    return None


def _norm_str(value) -> str:
    return stringify_cell(value).strip().lower()


def _matches(cell, op: str, literal) -> bool:
    if op == "=":
        return _norm_str(cell) == _norm_str(literal)
    left = coerce_number(cell)
    right = coerce_number(literal)
    if left is not None and right is not None:
        return left < right if op == "<" else left > right
    a, b = _norm_str(cell), _norm_str(literal)
    return a < b if op == "<" else a > b


def execute(query: SqlQuery, store: TableStore) -> ExecResult:
    """Run a query against the table store.

    "=" compares trimmed, lowercased strings; "<"/">" compare numerically
    when both sides parse as numbers, else lexicographically.  Unknown
    table or column raises ExecutionError; an empty row match with no
    aggregate is an empty (but valid) result.
    """
    table = store.get(query.table_id)
    if table is None:
        raise ExecutionError(f"unknown table id: {query.table_id}")

    def column_index(name: str) -> int:
        wanted = name.strip().lower()
        for i, header in enumerate(table.header):
            if header.strip().lower() == wanted:
                return i
        raise ExecutionError(f"unknown column {name!r} in table {query.table_id}")

    select_at = column_index(query.select_column)
    tests = [(column_index(c.column), c.op, c.value) for c in query.conditions]
    values = [
        row[select_at]
        for row in table.rows
        if all(_matches(row[i], op, literal) for i, op, literal in tests)
    ]

    agg = query.aggregate
    if agg is None:
        seen = set()
        distinct = []
        for v in values:
            text = stringify_cell(v)
            if text not in seen:
                seen.add(text)
                distinct.append(text)
        return ExecResult(values=distinct)
    if agg == "COUNT":
        return ExecResult(values=[str(len(values))])
    if agg in ("SUM", "AVG"):
        numbers = [n for n in (coerce_number(v) for v in values) if n is not None]
        if agg == "SUM":
            total = sum(numbers)
        else:
            total = sum(numbers) / len(numbers) if numbers else 0.0
        return ExecResult(values=[stringify_cell(float(total))])
    # MIN / MAX
    if not values:
        return ExecResult(values=[])
    numbers = [coerce_number(v) for v in values]
    if all(n is not None for n in numbers):
        keyed = list(zip(numbers, values))
    else:
        keyed = [(_norm_str(v), v) for v in values]
    best = min(keyed, key=lambda kv: kv[0]) if agg == "MIN" else max(keyed, key=lambda kv: kv[0])
    return ExecResult(values=[stringify_cell(best[1])])
