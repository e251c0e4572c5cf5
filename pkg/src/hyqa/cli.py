"""Batch command-line pipeline.

Each subcommand reads the previous stage's file artifact and writes its
own, so every stage is restartable:

    ingest -> index -> retrieve -> rerank -> answer -> evaluate -> report

Flags override config-file values, which override defaults.  Output files
are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from . import corpus, evalkit, readerparser, rerank, retrieval, sqlkit
from .corpus import TABULAR, TEXTUAL
from .remote import ProtocolError, TransportError

CONFIG_KEYS = {
    "k_retrieve": int,
    "n_rerank": int,
    "beam_size": int,
    "max_context_tokens": int,
    "max_words": int,
    "overlap": int,
    "seed": int,
    "scorer": str,
    "generator": str,
    "k1": float,
    "b": float,
}


def _atomic_write(path, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _require_file(path, what: str):
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing {what} file: {path}")
    return path


def read_questions(path) -> dict[str, str]:
    questions = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            qid = record["qid"]
            if qid in questions:
                raise ValueError(f"{path}:{lineno}: duplicate qid {qid}")
            questions[qid] = record["question"]
    return questions


def _load_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = CONFIG_KEYS[key](raw.strip())
    return values


def cmd_ingest(args) -> int:
    if args.kind == "text":
        if args.already_split:
            corpus.load_passages(_require_file(args.input, "passages"), TEXTUAL)
            records = []
            with open(args.input, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    raw = json.loads(line)
                    records.append(
                        corpus.TextPassage(
                            raw["id"], raw["title"], raw["content"],
                            raw.get("source_doc", raw["id"]),
                        )
                    )
        else:
            records = []
            with open(_require_file(args.input, "documents"), encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    doc = json.loads(line)
                    records.extend(
                        corpus.split_passage(
                            doc.get("text", doc.get("content", "")),
                            doc["title"],
                            max_words=args.max_words,
                            overlap=args.overlap,
                            source_doc=doc.get("id"),
                        )
                    )
        _atomic_write(args.output, lambda p: corpus.write_passages(p, records))
        print(f"ingest: wrote {len(records)} textual passages to {args.output}")
        return 0
    store = corpus.load_tables(_require_file(args.input, "tables"))
    chunks = []
    for table in store.tables():
        chunks.extend(corpus.flatten_table(table, max_words=args.max_words))
    _atomic_write(args.output, lambda p: corpus.write_passages(p, chunks))
    print(f"ingest: wrote {len(chunks)} tabular passages from {len(store)} tables to {args.output}")
    return 0


def cmd_index(args) -> int:
    loaded = corpus.load_passages(_require_file(args.passages, "passages"), args.kind)
    index = retrieval.build_index(loaded, k1=args.k1, b=args.b)
    _atomic_write(args.output, lambda p: retrieval.save_index(index, p))
    print(f"index: {index.doc_count} docs, avg length {index.avg_doc_len:.2f} -> {args.output}")
    return 0


def cmd_retrieve(args) -> int:
    questions = read_questions(_require_file(args.questions, "questions"))
    indices = []
    if args.text_index:
        indices.append(retrieval.load_index(_require_file(args.text_index, "textual index")))
    if args.tab_index:
        indices.append(retrieval.load_index(_require_file(args.tab_index, "tabular index")))
    if not indices:
        raise ValueError("need at least one of --text-index / --tab-index")
    run: dict[str, list[retrieval.RetrievedCandidate]] = {}
    for qid in sorted(questions):
        rows = []
        for index in indices:
            rows.extend(retrieval.retrieve(questions[qid], index, k=args.k_retrieve))
        run[qid] = rows
    _atomic_write(args.output, lambda p: retrieval.write_run(p, run))
    print(f"retrieve: wrote run for {len(run)} questions to {args.output}")
    return 0


def _load_candidate_pool(args) -> dict[str, corpus.Candidate]:
    pool: dict[str, corpus.Candidate] = {}
    if args.passages:
        for cand in corpus.load_passages(_require_file(args.passages, "passages"), TEXTUAL):
            pool[cand.id] = cand
    if args.tab_passages:
        for cand in corpus.load_passages(
            _require_file(args.tab_passages, "tabular passages"), TABULAR
        ):
            pool[cand.id] = cand
    if not pool:
        raise ValueError("need at least one of --passages / --tab-passages")
    return pool


def _make_scorer(spec: str):
    if spec == "lexical":
        return rerank.LexicalScorer()
    if spec.startswith("http://") or spec.startswith("https://"):
        return rerank.RemoteScorer(spec)
    raise ValueError(f"unknown scorer spec: {spec!r}")


def _run_candidates(run_rows, pool, qid):
    candidates = []
    for row in run_rows:
        if row.candidate_id not in pool:
            raise ValueError(f"candidate {row.candidate_id} (question {qid}) not in corpus")
        candidates.append(pool[row.candidate_id])
    return candidates


def cmd_rerank(args) -> int:
    run = retrieval.read_run(_require_file(args.run, "run"))
    questions = read_questions(_require_file(args.questions, "questions"))
    pool = _load_candidate_pool(args)
    scorer = _make_scorer(args.scorer)
    out: dict[str, list[retrieval.RetrievedCandidate]] = {}
    for qid in sorted(run):
        if qid not in questions:
            raise ValueError(f"run question {qid} missing from {args.questions}")
        candidates = _run_candidates(run[qid], pool, qid)
        scored = rerank.score_candidates(questions[qid], candidates, scorer)
        textual = [s for s in scored if s.kind == TEXTUAL]
        tabular = [s for s in scored if s.kind == TABULAR]
        top = rerank.select_top_joint(textual, tabular, n=args.n_rerank)
        out[qid] = [
            retrieval.RetrievedCandidate(s.candidate_id, s.kind, s.score, rank)
            for rank, s in enumerate(top, start=1)
        ]
    _atomic_write(args.output, lambda p: retrieval.write_run(p, out))
    print(f"rerank: wrote joint top-{args.n_rerank} for {len(out)} questions to {args.output}")
    return 0


def cmd_answer(args) -> int:
    run = retrieval.read_run(_require_file(args.run, "run"))
    questions = read_questions(_require_file(args.questions, "questions"))
    pool = _load_candidate_pool(args)
    generator = readerparser.make_generator(args.generator)
    predictions: dict[str, list[readerparser.GenerationOutput]] = {}
    for qid in sorted(run):
        question = questions[qid]
        candidates = _run_candidates(run[qid], pool, qid)
        contexts = [
            readerparser.serialize_candidate(question, c, args.max_context_tokens)
            for c in candidates
        ]
        request = readerparser.GenerationRequest(
            question=question,
            contexts=contexts,
            beam_size=args.beam_size,
            max_context_tokens=args.max_context_tokens,
        )
        predictions[qid] = readerparser.generate(request, generator)
    _atomic_write(args.output, lambda p: readerparser.write_predictions(p, predictions))
    print(f"answer: wrote {len(predictions)} predictions to {args.output}")
    return 0


def _run_ids(rows) -> list[str]:
    return [row.candidate_id for row in sorted(rows, key=lambda r: r.rank)]


def cmd_evaluate(args) -> int:
    predictions = readerparser.read_predictions(_require_file(args.predictions, "predictions"))
    gold = evalkit.read_gold(_require_file(args.gold, "gold"))
    store = corpus.load_tables(_require_file(args.tables, "tables"))
    report = evalkit.evaluate_answers(predictions, gold, store)

    if args.run:
        run = retrieval.read_run(_require_file(args.run, "run"))
        if args.qrels:
            qrels = evalkit.read_qrels(_require_file(args.qrels, "qrels"))
        else:
            pool = _load_candidate_pool(args)
            qrels = {}
            for qid, rows in run.items():
                if qid not in gold:
                    continue
                labeled = rerank.label_candidates(
                    _run_candidates(rows, pool, qid), gold[qid].answers
                )
                qrels[qid] = {c.id for c, label in labeled if label == rerank.POSITIVE}
        by_kind = {
            "hybrid": {qid: _run_ids(rows) for qid, rows in run.items()},
        }
        for kind in (TEXTUAL, TABULAR):
            filtered = {
                qid: [r.candidate_id for r in sorted(rows, key=lambda r: r.rank) if r.kind == kind]
                for qid, rows in run.items()
            }
            if any(filtered.values()):
                by_kind[kind] = filtered
        for name, ranked in by_kind.items():
            report.retrieval[name] = evalkit.retrieval_metrics(ranked, qrels)

    _atomic_write(args.output, lambda p: _write_text(p, report.to_json()))
    print(f"evaluate: Top-1 EM {report.aggregates['top1_em']:.1f} over "
          f"{int(report.aggregates['questions'])} questions -> {args.output}")
    return 0


def cmd_make_wikisql_both(args) -> int:
    run = retrieval.read_run(_require_file(args.run, "run"))
    gold = evalkit.read_gold(_require_file(args.gold, "gold"))
    pool = _load_candidate_pool(args)
    questions = {}
    textual: dict[str, list] = {}
    tabular: dict[str, list] = {}
    for qid, rows in run.items():
        if qid not in gold:
            continue
        questions[qid] = gold[qid].answers
        candidates = _run_candidates(rows, pool, qid)
        textual[qid] = [c for c in candidates if c.kind == TEXTUAL]
        tabular[qid] = [c for c in candidates if c.kind == TABULAR]
    kept = evalkit.select_wikisql_both(questions, textual, tabular)

    def write(path):
        with open(path, "w", encoding="utf-8") as fh:
            for qid in sorted(kept):
                fh.write(json.dumps({"qid": qid}) + "\n")

    _atomic_write(args.output, write)
    print(f"make-wikisql-both: kept {len(kept)} of {len(questions)} questions -> {args.output}")
    return 0


def cmd_report(args) -> int:
    with open(_require_file(args.report, "report"), encoding="utf-8") as fh:
        report = evalkit.EvalReport.from_json(fh.read())
    text = evalkit.render_report(report)
    if args.output:
        _atomic_write(args.output, lambda p: _write_text(p, text))
    else:
        print(text)
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="hyqa", description=__doc__)
    parser.add_argument("--config", help="key=value config file; flags take precedence")
    commands = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    class _Sub:
        @staticmethod
        def add_parser(name, **kwargs):
            subparsers[name] = commands.add_parser(name, **kwargs)
            return subparsers[name]

    sub = _Sub()

    p = sub.add_parser("ingest", help="split documents / flatten tables into passages")
    p.add_argument("--kind", choices=["text", "tables"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-words", dest="max_words", type=int, default=100)
    p.add_argument("--overlap", type=int, default=0)
    p.add_argument("--already-split", action="store_true",
                   help="input is already a passages file; validate and copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build a BM25 index snapshot")
    p.add_argument("--passages", required=True)
    p.add_argument("--kind", choices=[TEXTUAL, TABULAR], required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="top-k BM25 candidates per question")
    p.add_argument("--questions", required=True)
    p.add_argument("--text-index", dest="text_index")
    p.add_argument("--tab-index", dest="tab_index")
    p.add_argument("--k", dest="k_retrieve", type=int, default=100)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("rerank", help="jointly score and select the top candidates")
    p.add_argument("--questions", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--passages")
    p.add_argument("--tab-passages", dest="tab_passages")
    p.add_argument("--scorer", default="lexical", help="lexical or a service URL")
    p.add_argument("--n", dest="n_rerank", type=int, default=50)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("answer", help="generate and write beam outputs per question")
    p.add_argument("--questions", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--passages")
    p.add_argument("--tab-passages", dest="tab_passages")
    p.add_argument("--generator", required=True,
                   help="stub:FILE, constant:TEXT, copy, or a service URL")
    p.add_argument("--beam-size", dest="beam_size", type=int, default=3)
    p.add_argument("--max-context-tokens", dest="max_context_tokens", type=int, default=150)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("evaluate", help="score predictions against the gold file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--tables", required=True)
    p.add_argument("--run", help="optional run file for retrieval metrics")
    p.add_argument("--qrels", help="optional qrels; derived from gold answers when absent")
    p.add_argument("--passages")
    p.add_argument("--tab-passages", dest="tab_passages")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-wikisql-both", help="select questions answerable by both kinds")
    p.add_argument("--run", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--passages")
    p.add_argument("--tab-passages", dest="tab_passages")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_make_wikisql_both)

    p = sub.add_parser("report", help="render a report as aligned plain-text tables")
    p.add_argument("--report", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_report)

    return parser, subparsers


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args, _ = parser.parse_known_args(argv)
    try:
        if args.config:
            overrides = _load_config(_require_file(args.config, "config"))
            for sub_parser in subparsers.values():
                known = {a.dest for a in sub_parser._actions}
                sub_parser.set_defaults(**{k: v for k, v in overrides.items() if k in known})
        args = parser.parse_args(argv)
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (OSError, ValueError, KeyError, sqlkit.ExecutionError,
            TransportError, ProtocolError) as exc:
        print(f"hyqa {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
