"""Metrics and dataset-construction procedures.

Answer metrics (EM, F1, Top-1-EM with SQL execution), SQL metrics
(execution and logical-form accuracy, executable rate), ranking metrics
(recall@k, MAP, MRR), a category breakdown keyed on the gold SQL shape,
and the both-evidence question filter.
"""

from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field

from . import readerparser, sqlkit
from .corpus import TableStore

log = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)

DEFAULT_CUTOFFS = (1, 5, 10, 25, 50, 100)

CAT_ALL = "All"
CAT_COUNT_SMALL = "COUNT in {0,1}"
CAT_COUNT_LARGE = "COUNT >= 2"
CAT_MIN_MAX = "MIN/MAX"
CAT_SUM_AVG = "SUM/AVG"
CAT_COMPARISON = "Comparison (< or >)"
CAT_AND = "AND-condition"
CAT_LIST = "Answer is a list"
CAT_DIRECT = "Direct answers"
CATEGORY_ORDER = (
    CAT_ALL,
    CAT_COUNT_SMALL,
    CAT_COUNT_LARGE,
    CAT_MIN_MAX,
    CAT_SUM_AVG,
    CAT_COMPARISON,
    CAT_AND,
    CAT_LIST,
    CAT_DIRECT,
)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(pred: str, golds: list[str]) -> int:
    norm = normalize_answer(pred)
    return int(any(norm == normalize_answer(g) for g in golds))


def _token_f1(pred: str, gold: str) -> float:
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    same = sum(common.values())
    if same == 0:
        return 0.0
    precision = same / len(pred_tokens)
    recall = same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1(pred: str, golds: list[str]) -> float:
    """Max token-level F1 over the gold alternatives."""
    return max(_token_f1(pred, g) for g in golds)


def top1_em(resolved: readerparser.ResolvedAnswer, golds: list[str]) -> int:
    """EM on the rank-1 answer; a non-executable output counts as wrong.

    A single-valued result is matched against any gold alternative; a
    multi-valued result must equal the gold set after normalization.
    """
    if not resolved.executable or not resolved.answers:
        return 0
    if len(resolved.answers) == 1:
        return exact_match(resolved.answers[0], golds)
    pred_set = {normalize_answer(v) for v in resolved.answers}
    gold_set = {normalize_answer(g) for g in golds}
    return int(pred_set == gold_set)


def _result_set(result: sqlkit.ExecResult) -> frozenset:
    return frozenset(normalize_answer(v) for v in result.values)


def execution_accuracy(pred_sql: str, gold_sql: str, store: TableStore) -> int:
    """1 iff both queries execute and their normalized result sets match."""
    gold_result = sqlkit.execute(sqlkit.parse_sql(gold_sql), store)
    try:
        pred_result = sqlkit.execute(sqlkit.parse_sql(pred_sql), store)
    except (sqlkit.ParseError, sqlkit.ExecutionError):
        return 0
    return int(_result_set(pred_result) == _result_set(gold_result))


def logical_form_accuracy(pred_sql: str, gold_sql: str) -> int:
    """1 iff the queries are equal after canonicalization."""
    gold = sqlkit.canonicalize(sqlkit.parse_sql(gold_sql))
    try:
        pred = sqlkit.canonicalize(sqlkit.parse_sql(pred_sql))
    except sqlkit.ParseError:
        return 0
    return int(pred == gold)


def retrieval_metrics(
    run: dict[str, list[str]],
    qrels: dict[str, set[str]],
    cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
    depth: int | None = None,
) -> dict[str, float]:
    """Recall@k, MAP, and MRR for a ranked run under binary relevance.

    recall@k counts questions with at least one relevant candidate in the
    top k.  Average precision divides by the number of relevant candidates
    in the qrels.  Questions missing from the qrels are skipped.
    """
    recalls = {k: 0.0 for k in cutoffs}
    mrr_total = 0.0
    map_total = 0.0
    n = 0
    for qid, ranking in run.items():
        relevant = qrels.get(qid)
        if not relevant:
            log.warning("question %s missing from qrels; skipped", qid)
            continue
        n += 1
        if depth is not None:
            ranking = ranking[:depth]
        first_hit = None
        hits = 0
        precision_sum = 0.0
        for position, cid in enumerate(ranking, start=1):
            if cid in relevant:
                if first_hit is None:
                    first_hit = position
                hits += 1
                precision_sum += hits / position
        for k in cutoffs:
            if first_hit is not None and first_hit <= k:
                recalls[k] += 1.0
        if first_hit is not None:
            mrr_total += 1.0 / first_hit
        map_total += precision_sum / len(relevant)
    if n == 0:
        raise ValueError("no questions shared between run and qrels")
    metrics = {f"recall@{k}": 100.0 * recalls[k] / n for k in cutoffs}
    metrics["map"] = 100.0 * map_total / n
    metrics["mrr"] = 100.0 * mrr_total / n
    metrics["questions"] = float(n)
    return metrics


def categorize(gold_sql: str | None, gold_answers: list[str]) -> set[str]:
    """Non-exclusive category flags keyed on the gold SQL shape."""
    flags = set()
    if len(gold_answers) >= 2:
        flags.add(CAT_LIST)
    if not gold_sql:
        return flags
    query = sqlkit.parse_sql(gold_sql)
    if query.aggregate == "COUNT":
        number = sqlkit.coerce_number(gold_answers[0]) if gold_answers else None
        if number is not None and number >= 2:
            flags.add(CAT_COUNT_LARGE)
        else:
            flags.add(CAT_COUNT_SMALL)
    elif query.aggregate in ("MIN", "MAX"):
        flags.add(CAT_MIN_MAX)
    elif query.aggregate in ("SUM", "AVG"):
        flags.add(CAT_SUM_AVG)
    if any(c.op in ("<", ">") for c in query.conditions):
        flags.add(CAT_COMPARISON)
    if len(query.conditions) >= 2:
        flags.add(CAT_AND)
    return flags


def _contains_answer(norm_golds: list[str], content: str) -> bool:
    norm_content = normalize_answer(content)
    return any(g and g in norm_content for g in norm_golds)


def select_wikisql_both(
    questions: dict[str, list[str]],
    textual: dict[str, list],
    tabular: dict[str, list],
) -> list[str]:
    """Keep questions whose answer appears in both candidate kinds.

    ``questions`` maps qid -> gold answers; the candidate dicts map qid ->
    candidates with a ``content`` attribute.  A question is kept when some
    normalized gold answer is a substring of at least one textual and one
    tabular candidate, unless the answer shows up in more than half of all
    its candidates (trivially ubiquitous answers).
    """
    kept = []
    for qid, golds in questions.items():
        norm_golds = [normalize_answer(g) for g in golds]
        text_cands = textual.get(qid, [])
        tab_cands = tabular.get(qid, [])
        in_both = any(
            g
            and any(g in normalize_answer(c.content) for c in text_cands)
            and any(g in normalize_answer(c.content) for c in tab_cands)
            for g in norm_golds
        )
        if not in_both:
            continue
        everything = list(text_cands) + list(tab_cands)
        matches = sum(1 for c in everything if _contains_answer(norm_golds, c.content))
        if 2 * matches > len(everything):
            continue
        kept.append(qid)
    return kept


@dataclass
class GoldRecord:
    qid: str
    answers: list[str]
    sql: str | None = None


def read_gold(path) -> dict[str, GoldRecord]:
    gold = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            qid = record["qid"]
            if qid in gold:
                raise ValueError(f"{path}:{lineno}: duplicate qid {qid}")
            gold[qid] = GoldRecord(qid=qid, answers=list(record["answers"]), sql=record.get("sql"))
    return gold


def read_qrels(path) -> dict[str, set[str]]:
    qrels: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            qid, cid = line.split()
            qrels.setdefault(qid, set()).add(cid)
    return qrels


def write_qrels(path, qrels: dict[str, set[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in qrels:
            for cid in sorted(qrels[qid]):
                fh.write(f"{qid} {cid}\n")


@dataclass
class EvalReport:
    per_question: list[dict] = field(default_factory=list)
    aggregates: dict[str, float] = field(default_factory=dict)
    categories: dict[str, dict] = field(default_factory=dict)
    retrieval: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "aggregates": self.aggregates,
            "categories": self.categories,
            "retrieval": self.retrieval,
            "per_question": self.per_question,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        payload = json.loads(text)
        return cls(
            per_question=payload.get("per_question", []),
            aggregates=payload.get("aggregates", {}),
            categories=payload.get("categories", {}),
            retrieval=payload.get("retrieval", {}),
        )


def _mean_pct(values: list) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return 100.0 * sum(present) / len(present)


def evaluate_answers(
    predictions: dict[str, list[readerparser.GenerationOutput]],
    gold: dict[str, GoldRecord],
    store: TableStore,
) -> EvalReport:
    """Score rank-1 predictions against the gold file.

    EM/F1 are computed on questions answered directly; execution and
    logical-form accuracy on questions that carry a gold SQL query (a
    non-SQL or failing prediction scores 0 there); Top-1-EM on everything.
    """
    report = EvalReport()
    for qid in sorted(predictions):
        if qid not in gold:
            log.warning("question %s missing from gold; skipped", qid)
            continue
        outputs = predictions[qid]
        if not outputs:
            raise ValueError(f"no outputs for question {qid}")
        top = min(outputs, key=lambda o: o.beam_rank)
        resolved = readerparser.resolve_outputs([top], store)[0]
        answers = gold[qid].answers
        gold_sql = gold[qid].sql

        is_direct = top.prefix == readerparser.PREFIX_ANSWER
        is_sql = top.prefix == readerparser.PREFIX_SQL
        record = {
            "qid": qid,
            "prefix": top.prefix,
            "answers": resolved.answers,
            "executable": resolved.executable,
            "top1_em": top1_em(resolved, answers),
            "em": exact_match(top.payload, answers) if is_direct else None,
            "f1": f1(top.payload, answers) if is_direct else None,
            "direct": int(is_direct),
            "sql": int(is_sql),
            "sql_executable": int(resolved.executable) if is_sql else None,
            "exec_acc": None,
            "lf_acc": None,
        }
        if gold_sql:
            if is_sql:
                record["exec_acc"] = execution_accuracy(top.payload, gold_sql, store)
                record["lf_acc"] = logical_form_accuracy(top.payload, gold_sql)
            else:
                record["exec_acc"] = 0
                record["lf_acc"] = 0
        record["categories"] = sorted(categorize(gold_sql, answers))
        report.per_question.append(record)

    if not report.per_question:
        raise ValueError("no questions shared between predictions and gold")

    rows = report.per_question
    aggregates = {
        "top1_em": _mean_pct([r["top1_em"] for r in rows]),
        "em": _mean_pct([r["em"] for r in rows]),
        "f1": _mean_pct([r["f1"] for r in rows]),
        "exec_acc": _mean_pct([r["exec_acc"] for r in rows]),
        "lf_acc": _mean_pct([r["lf_acc"] for r in rows]),
        "executable_sql_rate": _mean_pct([r["sql_executable"] for r in rows]),
        "pct_direct_top1": _mean_pct([r["direct"] for r in rows]),
        "pct_sql_top1": _mean_pct([r["sql"] for r in rows]),
        "questions": float(len(rows)),
    }
    report.aggregates = {k: v for k, v in aggregates.items() if v is not None}

    for label in CATEGORY_ORDER:
        if label == CAT_ALL:
            members = rows
        elif label == CAT_DIRECT:
            members = [r for r in rows if r["direct"]]
        else:
            members = [r for r in rows if label in r["categories"]]
        if not members:
            continue
        report.categories[label] = {
            "questions": len(members),
            "top1_em": _mean_pct([r["top1_em"] for r in members]),
        }
    return report


def render_report(report: EvalReport) -> str:
    """Aligned plain-text tables for a report."""
    lines = []
    if report.aggregates:
        lines.append("Answer metrics")
        lines.append("--------------")
        order = (
            ("Top-1 EM", "top1_em"),
            ("EM (direct answers)", "em"),
            ("F1 (direct answers)", "f1"),
            ("Execution accuracy", "exec_acc"),
            ("Logical form accuracy", "lf_acc"),
            ("Executable SQLs", "executable_sql_rate"),
            ("% Direct Ans in Top-1", "pct_direct_top1"),
            ("% SQL in Top-1", "pct_sql_top1"),
        )
        width = max(len(label) for label, _ in order)
        for label, key in order:
            if key in report.aggregates:
                lines.append(f"{label:<{width}}  {report.aggregates[key]:6.2f}")
        lines.append(f"{'Questions':<{width}}  {int(report.aggregates['questions']):6d}")
        lines.append("")
    if report.categories:
        lines.append("Category breakdown")
        lines.append("------------------")
        width = max(len(label) for label in report.categories)
        lines.append(f"{'Category':<{width}}  {'Top-1 EM':>8}  {'#Qs':>6}")
        for label in CATEGORY_ORDER:
            if label in report.categories:
                entry = report.categories[label]
                lines.append(f"{label:<{width}}  {entry['top1_em']:8.2f}  {entry['questions']:6d}")
        lines.append("")
    if report.retrieval:
        lines.append("Retrieval metrics")
        lines.append("-----------------")
        names = sorted(report.retrieval)
        keys = [k for k in report.retrieval[names[0]] if k != "questions"]
        width = max(len(k) for k in keys)
        header = f"{'':<{width}}" + "".join(f"  {name:>10}" for name in names)
        lines.append(header)
        for key in keys:
            row = f"{key:<{width}}"
            for name in names:
                row += f"  {report.retrieval[name].get(key, float('nan')):10.2f}"
            lines.append(row)
        lines.append("")
    return "\n".join(lines)
