"""Relevance cross-encoder over (question, title, content) inputs."""

from __future__ import annotations

import torch
from torch import nn

from .vocab import Vocab

INPUT_TEMPLATE = "[question] {question} [title] {title} [content] {content}"


def pair_text(question: str, title: str, content: str, max_input_tokens: int = 150) -> str:
    content = " ".join(content.split()[:max_input_tokens])
    return INPUT_TEMPLATE.format(question=question, title=title, content=content)


class CrossEncoder(nn.Module):
    """Bag-of-words encoder with an MLP head emitting a score in (0, 1)."""

    def __init__(self, vocab: Vocab, d_model: int = 64, dropout: float = 0.1):
        super().__init__()
        self.vocab = vocab
        self.d_model = d_model
        self.embed = nn.EmbeddingBag(len(vocab), d_model, mode="mean", padding_idx=vocab.pad_id)
        self.head = nn.Sequential(
            nn.Linear(d_model, d_model),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(d_model, 1),
        )

    def forward(self, flat_ids: torch.Tensor, offsets: torch.Tensor) -> torch.Tensor:
        pooled = self.embed(flat_ids, offsets)
        return self.head(pooled).squeeze(-1)

    def _batch(self, texts: list[str], max_input_tokens: int):
        ids = []
        offsets = []
        at = 0
        for text in texts:
            encoded = self.vocab.encode(text, max_tokens=max_input_tokens + 8) or [self.vocab.unk_id]
            offsets.append(at)
            ids.extend(encoded)
            at += len(encoded)
        return torch.tensor(ids, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)

    def scores(self, texts: list[str], max_input_tokens: int = 150) -> torch.Tensor:
        """Relevance scores for pre-rendered pair texts."""
        flat, offsets = self._batch(texts, max_input_tokens)
        return torch.sigmoid(self.forward(flat, offsets))

    @torch.no_grad()
    def score_pairs(self, pairs: list[tuple[str, str, str]], max_input_tokens: int = 150) -> list[float]:
        self.eval()
        texts = [pair_text(q, t, c, max_input_tokens) for q, t, c in pairs]
        return [float(s) for s in self.scores(texts, max_input_tokens)]


def ranking_loss(scores: torch.Tensor, positives: int) -> torch.Tensor:
    """Negative log-likelihood over one positive block and the negatives.

    ``scores`` holds the positive candidates first.  Scores are clamped
    away from 0 and 1 so the loss stays finite.
    """
    eps = 1e-12
    clamped = scores.clamp(eps, 1.0 - eps)
    loss = -torch.log(clamped[:positives]).sum()
    if clamped.shape[0] > positives:
        loss = loss - torch.log1p(-clamped[positives:]).sum()
    return loss


def save_checkpoint(path, model: CrossEncoder, dropout: float) -> None:
    torch.save(
        {
            "kind": "cross_encoder",
            "tokens": model.vocab.tokens,
            "d_model": model.d_model,
            "dropout": dropout,
            "state": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> CrossEncoder:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "cross_encoder":
        raise ValueError(f"{path} is not a cross-encoder checkpoint")
    model = CrossEncoder(Vocab(payload["tokens"]), payload["d_model"], payload["dropout"])
    model.load_state_dict(payload["state"])
    model.eval()
    return model
