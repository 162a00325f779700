from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..minilang import tokenize

PAD, UNK, SEP = 0, 1, 2
RESERVED = ("<pad>", "<unk>", "<sep>")


def lexemes(text: str) -> list[str]:
    return [t.lexeme for t in tokenize(text)]


@dataclass
class Vocab:
    tokens: list[str] = field(default_factory=lambda: list(RESERVED))

    def __post_init__(self):
        if tuple(self.tokens[:3]) != RESERVED:
            raise ValueError("vocab must start with the reserved tokens")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate vocab entries")

    @classmethod
    def build(cls, texts: Iterable[str], min_count: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for lex in lexemes(text):
                counts[lex] = counts.get(lex, 0) + 1
        kept = sorted(t for t, c in counts.items() if c >= min_count and t not in RESERVED)
        return cls(list(RESERVED) + kept)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, text: str, max_len: int) -> tuple[list[int], bool]:
        """Token ids, tail-truncated to ``max_len``; the flag reports truncation."""
        ids = [self.index.get(lex, UNK) for lex in lexemes(text)]
        return ids[:max_len], len(ids) > max_len
