"""Whitespace tokenizer with a data-built vocabulary.

Deliberately simple: the stand-in models this harness trains on CPU do not
justify a learned subword vocabulary, and the file contract (vocab.json in
the adapter directory) keeps generation reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


class Tokenizer:
    def __init__(self, tokens: list[str]):
        self.itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @classmethod
    def build(cls, texts) -> "Tokenizer":
        seen = {}
        for text in texts:
            for token in text.split():
                seen.setdefault(token, None)
        return cls(sorted(seen))

    @property
    def vocab_size(self) -> int:
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    def encode(self, text: str) -> list[int]:
        unk = self.stoi[UNK]
        return [self.stoi.get(t, unk) for t in text.split()]

    def decode(self, ids) -> str:
        specials = {self.stoi[s] for s in SPECIALS}
        return " ".join(self.itos[i] for i in ids if i not in specials)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"tokens": self.itos}, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Tokenizer":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        tok = cls([])
        tok.itos = list(raw["tokens"])
        tok.stoi = {t: i for i, t in enumerate(tok.itos)}
        return tok
