"""HTTP service exposing the /score and /generate wire protocols.

POST /score    {"pairs": [{"question", "title", "content"}, ...]}
               -> {"scores": [s, ...]} index-aligned, each in [0, 1]
POST /generate {"question", "contexts": [...], "beam_size": k}
               -> {"outputs": [{"text", "score"}, ...]} exactly k,
               score-descending

Model identifiers select either a training checkpoint or a fresh
seeded model ("tiny:<seed>"); fresh models build their vocabulary from
the request itself, so requests stay stateless.
"""

from __future__ import annotations

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import AdapterConfig
from .crossenc import CrossEncoder, load_checkpoint as load_cross_encoder, pair_text
from .seq2seq import FusionSeq2Seq, load_checkpoint as load_seq2seq
from .vocab import Vocab


class ScorePair(BaseModel):
    question: str
    title: str
    content: str


class ScoreRequest(BaseModel):
    pairs: list[ScorePair]


class GenerateRequest(BaseModel):
    question: str
    contexts: list[str]
    beam_size: int = 3


def _tiny_seed(spec: str) -> int | None:
    if spec.startswith("tiny:"):
        try:
            return int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad tiny model spec {spec!r}") from exc
    return None


class ScorerBackend:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.seed = _tiny_seed(config.cross_encoder)
        self.model = None if self.seed is not None else load_cross_encoder(config.cross_encoder)

    def score(self, pairs: list[tuple[str, str, str]]) -> list[float]:
        model = self.model
        if model is None:
            texts = [pair_text(q, t, c, self.config.max_input_tokens) for q, t, c in pairs]
            torch.manual_seed(self.seed)
            model = CrossEncoder(Vocab.build(texts), self.config.d_model, self.config.dropout)
        return model.score_pairs(pairs, self.config.max_input_tokens)


class GeneratorBackend:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.seed = _tiny_seed(config.seq2seq)
        self.model = None if self.seed is not None else load_seq2seq(config.seq2seq)

    def generate(self, question: str, contexts: list[str], beam_size: int):
        model = self.model
        if model is None:
            torch.manual_seed(self.seed)
            model = FusionSeq2Seq(
                Vocab.build(contexts + [question]),
                self.config.d_model,
                self.config.n_heads,
                self.config.n_layers,
                self.config.dropout,
            )
        return model.beam_search(
            contexts,
            beam_size,
            self.config.max_input_tokens,
            self.config.max_target_tokens,
        )


def build_app(config: AdapterConfig | None = None) -> FastAPI:
    config = config or AdapterConfig()
    app = FastAPI(title="qaserve", version="0.1.0")
    scorer = ScorerBackend(config)
    generator = GeneratorBackend(config)

    @app.post("/score")
    def score(request: ScoreRequest):
        if not request.pairs:
            raise HTTPException(status_code=400, detail="pairs must be non-empty")
        try:
            scores = scorer.score([(p.question, p.title, p.content) for p in request.pairs])
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"scoring failed: {exc}") from exc
        return {"scores": scores}

    @app.post("/generate")
    def generate(request: GenerateRequest):
        if not request.contexts:
            raise HTTPException(status_code=400, detail="contexts must be non-empty")
        if request.beam_size < 1:
            raise HTTPException(status_code=400, detail="beam_size must be >= 1")
        try:
            outputs = generator.generate(request.question, request.contexts, request.beam_size)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"generation failed: {exc}") from exc
        return {"outputs": [{"text": text, "score": score} for text, score in outputs]}

    return app


def serve(config: AdapterConfig, host: str = "127.0.0.1", port: int = 8808) -> None:
    import uvicorn

    uvicorn.run(build_app(config), host=host, port=port)
