from __future__ import annotations

import hashlib
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from ..model.transformer import BOS, EOS, PAD, UNK

RESERVED = ("<pad>", "<s>", "</s>", "<unk>")
assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)


def tokenize(sentence: str) -> list[str]:
    return sentence.split()


class Vocabulary:
    """Token/id bijection with pad, bos, eos and unk fixed at ids 0-3."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            raise ValueError(f"vocabulary must start with {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def encode(self, sentence: str | Sequence[str]) -> list[int]:
        toks = tokenize(sentence) if isinstance(sentence, str) else sentence
        return [self.index.get(t, UNK) for t in toks]

    def decode(self, ids: Iterable[int], strip: bool = True) -> str:
        out = []
        for i in ids:
            i = int(i)
            if strip and i == EOS:
                break
            if strip and i in (PAD, BOS):
                continue
            out.append(self.tokens[i])
        return " ".join(out)

    def to_bytes(self) -> bytes:
        return ("\n".join(self.tokens) + "\n").encode("utf-8")

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls(Path(path).read_text(encoding="utf-8").split("\n")[:-1])


def build_vocab(corpora, cap: int) -> Vocabulary:
    """Most frequent ``cap - 4`` tokens over both sides of every corpus.

    Frequency ties are broken lexicographically.
    """
    if cap < 5:
        raise ValueError(f"vocabulary cap {cap} leaves no room beside the 4 reserved ids")
    corpora = list(corpora)
    if not corpora:
        raise ValueError("build_vocab needs at least one corpus")
    counts: Counter = Counter()
    for corpus in corpora:
        for src, tgt in corpus.pairs:
            counts.update(tokenize(src))
            counts.update(tokenize(tgt))
    for tok in RESERVED:
        counts.pop(tok, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(list(RESERVED) + [t for t, _ in ranked[: cap - len(RESERVED)]])
