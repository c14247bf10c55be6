"""Seeded multi-domain substitution-cipher corpora.

Every domain draws sentences over ``n_slots`` word slots and translates
each slot through its own substitution table.  A fraction ``overlap`` of
the slots in each non-general domain reuses the general domain's entry
(same source word, same target word); the rest get words that occur in
no other domain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DomainCorpus

_CONS = "bdfghklmnprstvz"
_VOWS = "aeiou"


@dataclass
class SynthSpec:
    domains: list[str] = field(default_factory=lambda: ["general", "dom1", "dom2", "dom3", "dom4", "dom5"])
    overlap: float = 0.5
    pairs_per_domain: int = 2000
    n_slots: int = 40
    min_len: int = 3
    max_len: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")
        if len(self.domains) < 1 or len(set(self.domains)) != len(self.domains):
            raise ValueError("domains must be a non-empty list of distinct names")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.n_slots < 1 or self.pairs_per_domain < 1:
            raise ValueError("n_slots and pairs_per_domain must be positive")


def _word_factory(rng: np.random.Generator):
    used: set[str] = set()

    def fresh() -> str:
        while True:
            n = int(rng.integers(2, 4))
            w = "".join(_CONS[rng.integers(len(_CONS))] + _VOWS[rng.integers(len(_VOWS))] for _ in range(n))
            if w not in used:
                used.add(w)
                return w

    return fresh


def substitution_tables(spec: SynthSpec) -> list[list[tuple[str, str]]]:
    """Per-domain ``slot -> (source word, target word)`` tables; index 0 is general."""
    rng = np.random.default_rng([spec.seed, 1])
    fresh = _word_factory(rng)
    general = [(fresh(), fresh().upper()) for _ in range(spec.n_slots)]
    tables = [general]
    n_shared = int(round(spec.overlap * spec.n_slots))
    for _ in spec.domains[1:]:
        shared = set(rng.permutation(spec.n_slots)[:n_shared].tolist())
        tables.append([general[i] if i in shared else (fresh(), fresh().upper()) for i in range(spec.n_slots)])
    return tables


def synthesize(spec: SynthSpec) -> list[DomainCorpus]:
    tables = substitution_tables(spec)
    corpora = []
    for d, (name, table) in enumerate(zip(spec.domains, tables)):
        rng = np.random.default_rng([spec.seed, 2, d])
        seen: set[tuple[str, str]] = set()
        pairs = []
        attempts = 0
        while len(pairs) < spec.pairs_per_domain:
            attempts += 1
            if attempts > 50 * spec.pairs_per_domain:
                raise ValueError(f"domain {name}: cannot draw {spec.pairs_per_domain} distinct pairs")
            n = int(rng.integers(spec.min_len, spec.max_len + 1))
            slots = rng.integers(spec.n_slots, size=n)
            pair = (" ".join(table[s][0] for s in slots), " ".join(table[s][1] for s in slots))
            if pair not in seen:
                seen.add(pair)
                pairs.append(pair)
        corpora.append(DomainCorpus(name, pairs, "synthetic", {"kept": len(pairs)}))
    return corpora
