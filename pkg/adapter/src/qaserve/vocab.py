"""Whitespace word vocabulary shared by both tiny models.

Targets must survive a decode round-trip exactly, so tokens keep their
surface form (no lowercasing); encoding maps unseen words to <unk>.
"""

from __future__ import annotations

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


class Vocab:
    def __init__(self, tokens: list[str]):
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if self.tokens[:4] != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    @classmethod
    def build(cls, texts) -> "Vocab":
        seen = {}
        for text in texts:
            for word in text.split():
                if word not in seen:
                    seen[word] = len(seen)
        return cls(list(SPECIALS) + sorted(seen, key=seen.get))

    def encode(self, text: str, max_tokens: int | None = None) -> list[int]:
        words = text.split()
        if max_tokens is not None:
            words = words[:max_tokens]
        return [self.index.get(w, self.unk_id) for w in words]

    def decode(self, ids) -> str:
        words = []
        for i in ids:
            if i in (self.pad_id, self.bos_id):
                continue
            if i == self.eos_id:
                break
            words.append(self.tokens[i])
        return " ".join(words)
