"""Fine-tuning entrypoints for the cross-encoder and the generator.

Reranker batches and generator examples are consumed from the pipeline's
JSONL artifacts.  Both loops use Adam with linear warmup followed by
linear annealing to zero, and write periodic checkpoints.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from . import crossenc, seq2seq
from .config import AdapterConfig
from .crossenc import CrossEncoder, pair_text, ranking_loss
from .seq2seq import FusionSeq2Seq
from .vocab import Vocab

TARGET_PREFIXES = ("answer: ", "sql: ")


@dataclass
class RerankerBatch:
    question_id: str
    question: str
    positives: list[dict]
    negatives: list[dict]


@dataclass
class GeneratorRow:
    qid: str
    contexts: list[str]
    target: str


@dataclass
class TrainingResult:
    initial_loss: float
    final_loss: float
    step_losses: list[float] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    model: object = None


def read_reranker_batches(path) -> list[RerankerBatch]:
    """One JSON object per line: {question_id, question, positives, negatives}."""
    batches = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            batch = RerankerBatch(
                question_id=record["question_id"],
                question=record["question"],
                positives=list(record["positives"]),
                negatives=list(record["negatives"]),
            )
            if not batch.positives:
                raise ValueError(f"{path}:{lineno}: batch without a positive candidate")
            batches.append(batch)
    return batches


def read_generator_examples(path) -> list[GeneratorRow]:
    """One JSON object per line: {qid, contexts, targets}.

    Questions carrying several prefixed targets contribute one training
    row per target.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            targets = record["targets"]
            if not targets:
                raise ValueError(f"{path}:{lineno}: no targets")
            for target in targets:
                if not target.startswith(TARGET_PREFIXES):
                    raise ValueError(
                        f"{path}:{lineno}: target missing answer:/sql: prefix: {target!r}"
                    )
                rows.append(GeneratorRow(record["qid"], list(record["contexts"]), target))
    return rows


def _schedule(optimizer, total_steps: int, warmup_fraction: float):
    warmup = max(1, round(total_steps * warmup_fraction))

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        remaining = max(1, total_steps - warmup)
        return max(0.0, (total_steps - step) / remaining)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


def _batch_texts(batch: RerankerBatch, max_input_tokens: int) -> list[str]:
    return [
        pair_text(batch.question, c.get("title", ""), c.get("content", ""), max_input_tokens)
        for c in batch.positives + batch.negatives
    ]


def _reranker_dataset_loss(model: CrossEncoder, batches, max_input_tokens: int) -> float:
    model.eval()
    with torch.no_grad():
        total = sum(
            float(ranking_loss(
                model.scores(_batch_texts(b, max_input_tokens), max_input_tokens),
                len(b.positives),
            ))
            for b in batches
        )
    return total / len(batches)


def finetune_reranker(
    batches: list[RerankerBatch],
    config: AdapterConfig,
    out_dir=None,
) -> TrainingResult:
    """Train the cross-encoder on sampled positive/negative batches."""
    if not batches:
        raise ValueError("empty batch stream")
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    vocab = Vocab.build(
        text for b in batches for text in _batch_texts(b, config.max_input_tokens)
    )
    model = CrossEncoder(vocab, config.d_model, config.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = _schedule(optimizer, config.train_steps, config.warmup_fraction)

    result = TrainingResult(
        initial_loss=_reranker_dataset_loss(model, batches, config.max_input_tokens),
        final_loss=0.0,
        model=model,
    )
    order = []
    for step in range(config.train_steps):
        model.train()
        optimizer.zero_grad()
        total = None
        for _ in range(min(config.batch_size, len(batches))):
            if not order:
                order = rng.sample(range(len(batches)), len(batches))
            batch = batches[order.pop()]
            scores = model.scores(_batch_texts(batch, config.max_input_tokens),
                                  config.max_input_tokens)
            loss = ranking_loss(scores, len(batch.positives))
            total = loss if total is None else total + loss
        total.backward()
        optimizer.step()
        scheduler.step()
        result.step_losses.append(float(total))
        if out_dir and (step + 1) % config.checkpoint_every == 0:
            result.checkpoints.append(_save(out_dir, f"reranker-step{step + 1}.pt",
                                            model, config, crossenc.save_checkpoint))
    result.final_loss = _reranker_dataset_loss(model, batches, config.max_input_tokens)
    if out_dir:
        result.checkpoints.append(_save(out_dir, "reranker-final.pt",
                                        model, config, crossenc.save_checkpoint))
    return result


def _generator_dataset_loss(model: FusionSeq2Seq, rows, config: AdapterConfig) -> float:
    model.eval()
    with torch.no_grad():
        total = sum(
            float(model.sequence_loss(r.contexts, r.target,
                                      config.max_input_tokens, config.max_target_tokens))
            for r in rows
        )
    return total / len(rows)


def finetune_generator(
    rows: list[GeneratorRow],
    config: AdapterConfig,
    out_dir=None,
) -> TrainingResult:
    """Train the fusion generator on prefixed-target rows."""
    if not rows:
        raise ValueError("empty example stream")
    for row in rows:
        if not row.target.startswith(TARGET_PREFIXES):
            raise ValueError(f"target missing answer:/sql: prefix: {row.target!r}")
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    vocab = Vocab.build(
        [text for r in rows for text in r.contexts] + [r.target for r in rows]
    )
    model = FusionSeq2Seq(vocab, config.d_model, config.n_heads, config.n_layers, config.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = _schedule(optimizer, config.train_steps, config.warmup_fraction)

    result = TrainingResult(
        initial_loss=_generator_dataset_loss(model, rows, config),
        final_loss=0.0,
        model=model,
    )
    order = []
    for step in range(config.train_steps):
        model.train()
        optimizer.zero_grad()
        total = None
        for _ in range(min(config.batch_size, len(rows))):
            if not order:
                order = rng.sample(range(len(rows)), len(rows))
            row = rows[order.pop()]
            loss = model.sequence_loss(row.contexts, row.target,
                                       config.max_input_tokens, config.max_target_tokens)
            total = loss if total is None else total + loss
        (total / min(config.batch_size, len(rows))).backward()
        optimizer.step()
        scheduler.step()
        result.step_losses.append(float(total))
        if out_dir and (step + 1) % config.checkpoint_every == 0:
            result.checkpoints.append(_save(out_dir, f"generator-step{step + 1}.pt",
                                            model, config, seq2seq.save_checkpoint))
    result.final_loss = _generator_dataset_loss(model, rows, config)
    if out_dir:
        result.checkpoints.append(_save(out_dir, "generator-final.pt",
                                        model, config, seq2seq.save_checkpoint))
    return result


def _save(out_dir, name, model, config, saver) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    saver(path, model, config.dropout)
    return path
