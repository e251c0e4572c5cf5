"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class AdapterConfig:
    """Knobs for serving and fine-tuning.

    Model identifiers are either "tiny:<seed>" (a fresh randomly
    initialized model) or a checkpoint path produced by the training
    entrypoints.  The learning rate warms up linearly to its peak and then
    anneals linearly to zero.
    """

    cross_encoder: str = "tiny:0"
    seq2seq: str = "tiny:0"
    max_input_tokens: int = 150
    max_target_tokens: int = 48
    beam_size: int = 3
    device: str = "cpu"
    learning_rate: float = 1e-4
    dropout: float = 0.1
    batch_size: int = 32
    warmup_fraction: float = 0.1
    train_steps: int = 10_000
    checkpoint_every: int = 1000
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        for name in ("max_input_tokens", "max_target_tokens", "batch_size",
                     "train_steps", "checkpoint_every", "d_model"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_file(cls, path) -> "AdapterConfig":
        """Load key=value lines; unknown keys are rejected."""
        known = {f.name: f.type for f in fields(cls)}
        casts = {"cross_encoder": str, "seq2seq": str, "device": str}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, raw = line.partition("=")
                key = key.strip()
                if not sep or key not in known:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                raw = raw.strip()
                if key in casts:
                    values[key] = raw
                elif key in ("learning_rate", "dropout", "warmup_fraction"):
                    values[key] = float(raw)
                else:
                    values[key] = int(raw)
        return cls(**values)
