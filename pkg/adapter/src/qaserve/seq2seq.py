"""Encoder-decoder generator with per-context fusion.

Each context is encoded independently; the encoder states are then
concatenated along the sequence axis and the decoder attends over the
whole fused memory.  Decoding is plain beam search returning the k best
sequences with their cumulative log-probabilities.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .vocab import Vocab


class PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int = 2048):
        super().__init__()
        position = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        table = torch.zeros(max_len, d_model)
        table[:, 0::2] = torch.sin(position * div)
        table[:, 1::2] = torch.cos(position * div)
        self.register_buffer("table", table)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.table[: x.shape[1]].unsqueeze(0)


class FusionSeq2Seq(nn.Module):
    def __init__(
        self,
        vocab: Vocab,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 2,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.vocab = vocab
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.embed = nn.Embedding(len(vocab), d_model, padding_idx=vocab.pad_id)
        self.positional = PositionalEncoding(d_model)
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d_model, n_heads, dim_feedforward=4 * d_model,
                dropout=dropout, batch_first=True,
            ),
            n_layers,
        )
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d_model, n_heads, dim_feedforward=4 * d_model,
                dropout=dropout, batch_first=True,
            ),
            n_layers,
        )
        self.out = nn.Linear(d_model, len(vocab))

    def fuse_contexts(self, contexts: list[str], max_input_tokens: int):
        """Encode every context separately; concatenate the states."""
        if not contexts:
            raise ValueError("contexts must be non-empty")
        encoded = [
            self.vocab.encode(c, max_tokens=max_input_tokens) or [self.vocab.unk_id]
            for c in contexts
        ]
        width = max(len(ids) for ids in encoded)
        batch = torch.full((len(encoded), width), self.vocab.pad_id, dtype=torch.long)
        for row, ids in enumerate(encoded):
            batch[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        padding = batch.eq(self.vocab.pad_id)
        states = self.encoder(
            self.positional(self.embed(batch)), src_key_padding_mask=padding
        )
        memory = states.reshape(1, -1, self.d_model)
        memory_padding = padding.reshape(1, -1)
        return memory, memory_padding

    def decode_step(self, target_ids: torch.Tensor, memory, memory_padding) -> torch.Tensor:
        """Logits over the vocabulary for each target position."""
        width = target_ids.shape[1]
        causal = nn.Transformer.generate_square_subsequent_mask(width, dtype=torch.bool)
        states = self.decoder(
            self.positional(self.embed(target_ids)),
            memory.expand(target_ids.shape[0], -1, -1),
            tgt_mask=causal,
            tgt_key_padding_mask=target_ids.eq(self.vocab.pad_id),
            memory_key_padding_mask=memory_padding.expand(target_ids.shape[0], -1),
        )
        return self.out(states)

    def sequence_loss(self, contexts: list[str], target: str, max_input_tokens: int,
                      max_target_tokens: int) -> torch.Tensor:
        """Teacher-forced cross-entropy on one (contexts, target) example."""
        memory, memory_padding = self.fuse_contexts(contexts, max_input_tokens)
        ids = self.vocab.encode(target, max_tokens=max_target_tokens)
        full = torch.tensor([[self.vocab.bos_id] + ids + [self.vocab.eos_id]], dtype=torch.long)
        logits = self.decode_step(full[:, :-1], memory, memory_padding)
        return nn.functional.cross_entropy(
            logits.reshape(-1, len(self.vocab)), full[:, 1:].reshape(-1)
        )

    @torch.no_grad()
    def beam_search(
        self,
        contexts: list[str],
        beam_size: int,
        max_input_tokens: int = 150,
        max_target_tokens: int = 48,
    ) -> list[tuple[str, float]]:
        """k best decodes as (text, cumulative log-prob), score-descending."""
        self.eval()
        memory, memory_padding = self.fuse_contexts(contexts, max_input_tokens)
        beams = [([self.vocab.bos_id], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(max_target_tokens):
            if not beams:
                break
            batch = torch.tensor([ids for ids, _ in beams], dtype=torch.long)
            logits = self.decode_step(batch, memory, memory_padding)
            log_probs = torch.log_softmax(logits[:, -1, :], dim=-1)
            candidates = []
            for row, (ids, score) in enumerate(beams):
                top = torch.topk(log_probs[row], beam_size)
                for token, lp in zip(top.indices.tolist(), top.values.tolist()):
                    candidates.append((ids + [token], score + lp))
            candidates.sort(key=lambda c: -c[1])
            beams = []
            for ids, score in candidates:
                if ids[-1] == self.vocab.eos_id:
                    finished.append((ids, score))
                elif len(beams) < beam_size:
                    beams.append((ids, score))
                if len(finished) >= beam_size and len(beams) >= beam_size:
                    break
        finished.extend(beams)
        finished.sort(key=lambda c: -c[1])
        top = finished[:beam_size]
        while len(top) < beam_size:  # degenerate vocabularies underfill
            top.append(top[-1])
        return [(self.vocab.decode(ids), score) for ids, score in top]


def save_checkpoint(path, model: FusionSeq2Seq, dropout: float) -> None:
    torch.save(
        {
            "kind": "seq2seq",
            "tokens": model.vocab.tokens,
            "d_model": model.d_model,
            "n_heads": model.n_heads,
            "n_layers": model.n_layers,
            "dropout": dropout,
            "state": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> FusionSeq2Seq:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("kind") != "seq2seq":
        raise ValueError(f"{path} is not a seq2seq checkpoint")
    model = FusionSeq2Seq(
        Vocab(payload["tokens"]),
        payload["d_model"],
        payload["n_heads"],
        payload["n_layers"],
        payload["dropout"],
    )
    model.load_state_dict(payload["state"])
    model.eval()
    return model
