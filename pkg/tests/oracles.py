"""Independent brute-force oracles and randomized fixture generators.

Everything here is deliberately written from the metric/algorithm
definitions, not from the package internals, so tests can cross-check the
real implementations against a second route.
"""

from __future__ import annotations

import math
import random
import re

from hyqa.corpus import Table
from hyqa.sqlkit import Condition, SqlQuery

_PLAIN_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)$")
_COMMA_NUM = re.compile(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$")


def _as_number(value):
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if _PLAIN_NUM.match(text):
        return float(text)
    if _COMMA_NUM.match(text):
        return float(text.replace(",", ""))
    return None


def _as_text(value):
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def _row_passes(cell, op, literal):
    if op == "=":
        return _as_text(cell).strip().lower() == _as_text(literal).strip().lower()
    cn, ln = _as_number(cell), _as_number(literal)
    if cn is not None and ln is not None:
        return cn < ln if op == "<" else cn > ln
    cs, ls = _as_text(cell).strip().lower(), _as_text(literal).strip().lower()
    return cs < ls if op == "<" else cs > ls


def oracle_filtered_values(query: SqlQuery, table: Table) -> list:
    """Select-column values of every row passing all conditions."""
    lowered = [h.strip().lower() for h in table.header]

    def col(name):
        name = name.strip().lower()
        if name not in lowered:
            raise LookupError(name)
        return lowered.index(name)

    select_at = col(query.select_column)
    checks = [(col(c.column), c.op, c.value) for c in query.conditions]
    out = []
    for row in table.rows:
        if all(_row_passes(row[i], op, lit) for i, op, lit in checks):
            out.append(row[select_at])
    return out


def oracle_execute(query: SqlQuery, table: Table) -> list[str]:
    """Naive filter-then-aggregate; raises LookupError on unknown names."""
    values = oracle_filtered_values(query, table)
    agg = query.aggregate
    if agg is None:
        distinct = []
        for v in values:
            t = _as_text(v)
            if t not in distinct:
                distinct.append(t)
        return distinct
    if agg == "COUNT":
        return [str(len(values))]
    if agg in ("SUM", "AVG"):
        numbers = [n for n in map(_as_number, values) if n is not None]
        if agg == "SUM":
            total = float(sum(numbers))
        else:
            total = float(sum(numbers) / len(numbers)) if numbers else 0.0
        return [_as_text(total)]
    if not values:
        return []
    numbers = list(map(_as_number, values))
    if all(n is not None for n in numbers):
        pairs = list(zip(numbers, values))
    else:
        pairs = [(_as_text(v).strip().lower(), v) for v in values]
    if agg == "MIN":
        pick = min(pairs, key=lambda p: p[0])
    else:
        pick = max(pairs, key=lambda p: p[0])
    return [_as_text(pick[1])]


def naive_bm25_scores(
    doc_terms: dict[str, list[str]], query_terms: list[str], k1: float = 1.2, b: float = 0.75
) -> dict[str, float]:
    """Score every document directly from the ranking formula."""
    n = len(doc_terms)
    avg = sum(len(t) for t in doc_terms.values()) / n
    scores = {}
    for doc_id, terms in doc_terms.items():
        total = 0.0
        for term in query_terms:
            tf = terms.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in doc_terms.values() if term in other)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(terms) / avg))
        scores[doc_id] = total
    return scores


_WORDS = (
    "alpha bravo charlie delta echo fox golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor"
).split()


def random_table(rng: random.Random, table_id: str, max_rows: int = 20, max_cols: int = 6) -> Table:
    n_cols = rng.randint(1, max_cols)
    n_rows = rng.randint(0, max_rows)
    header = []
    for i in range(n_cols):
        style = rng.randrange(4)
        base = rng.choice(_WORDS).capitalize()
        if style == 0:
            name = f"{base} {i}"
        elif style == 1:
            name = f"{base}({rng.choice('sxy')})"
        elif style == 2:
            name = f"{base} {rng.choice(_WORDS)}"
        else:
            name = base + str(i)
        header.append(name)

    def cell():
        kind = rng.randrange(6)
        if kind == 0:
            return rng.randint(-50, 50)
        if kind == 1:
            return round(rng.uniform(-20, 20), 2)
        if kind == 2:
            return f"{rng.randint(1, 99)},{rng.randint(0, 999):03d}"
        if kind == 3:
            return f"{rng.choice(_WORDS)} {rng.choice(_WORDS)}"
        if kind == 4:
            return ""
        return rng.choice(_WORDS)

    rows = [[cell() for _ in range(n_cols)] for _ in range(n_rows)]
    return Table(id=table_id, header=header, column_types=["text"] * n_cols, rows=rows)


def random_query(rng: random.Random, table: Table, miss_rate: float = 0.1) -> SqlQuery:
    """Grammar-sampled query, mostly over the table's own columns/values."""

    def column():
        if rng.random() < miss_rate:
            return "no such column"
        return rng.choice(table.header)

    def literal(col_name):
        if table.rows and rng.random() < 0.7:
            idx = [h.strip().lower() for h in table.header].index(col_name.strip().lower()) \
                if col_name.strip().lower() in [h.strip().lower() for h in table.header] else 0
            value = rng.choice(table.rows)[idx]
            if isinstance(value, (int, float)) and rng.random() < 0.5:
                return value
            return str(value)
        if rng.random() < 0.5:
            return rng.randint(-40, 40)
        return rng.choice(_WORDS)

    aggregate = rng.choice([None, None, "COUNT", "MIN", "MAX", "SUM", "AVG"])
    conditions = []
    for _ in range(rng.randint(0, 3)):
        col = column()
        conditions.append(Condition(column=col, op=rng.choice("=<>"), value=literal(col)))
    return SqlQuery(
        aggregate=aggregate,
        select_column=column(),
        table_id=table.id,
        conditions=conditions,
    )


def random_ast(rng: random.Random) -> SqlQuery:
    """Random query AST with awkward column names for round-trip tests."""

    def name():
        style = rng.randrange(5)
        base = rng.choice(_WORDS).capitalize()
        if style == 0:
            return f"{base}({rng.choice('sxy')})"
        if style == 1:
            return f"{base} {rng.choice(_WORDS)} {rng.randint(0, 9)}"
        if style == 2:
            return f"{base}/{rng.choice(_WORDS).capitalize()}"
        if style == 3:
            return f"{base} {rng.choice(_WORDS)}"
        return base

    def value():
        kind = rng.randrange(4)
        if kind == 0:
            return rng.randint(-999, 999)
        if kind == 1:
            return round(rng.uniform(-99, 99), 3)
        if kind == 2:
            return f"{rng.choice(_WORDS)} {rng.choice(_WORDS)} ({rng.randint(0, 9)})"
        return f"{rng.randint(1, 9)},{rng.randint(0, 999):03d}"

    conditions = [
        Condition(column=name(), op=rng.choice("=<>"), value=value())
        for _ in range(rng.randint(0, 3))
    ]
    return SqlQuery(
        aggregate=rng.choice([None, "COUNT", "MIN", "MAX", "SUM", "AVG"]),
        select_column=name(),
        table_id=f"table_{rng.randint(1, 3)}-{rng.randint(1000, 99999)}-{rng.randint(1, 9)}",
        conditions=conditions,
    )
