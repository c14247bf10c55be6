from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DomainCorpus, read_pairs, write_pairs


@dataclass
class MetaSplitConfig:
    seen: list[str]
    unseen: list[str] = field(default_factory=list)
    meta_train_size: int = 2000
    support_size: int = 200
    query_size: int = 400
    test_size: int = 200
    dev_size: int = 0
    seed: int = 0

    def __post_init__(self):
        both = set(self.seen) & set(self.unseen)
        if both:
            raise ValueError(f"domains listed as both seen and unseen: {sorted(both)}")
        if not self.seen:
            raise ValueError("at least one seen domain is required")
        for name in ("meta_train_size", "support_size", "query_size", "test_size", "dev_size"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class MetaSplit:
    """``meta_train`` pools (seen domains only); per-domain meta-test support/query; test and dev sets."""

    meta_train: dict[str, list[tuple[str, str]]]
    support: dict[str, list[tuple[str, str]]]
    query: dict[str, list[tuple[str, str]]]
    test: dict[str, list[tuple[str, str]]]
    dev: dict[str, list[tuple[str, str]]]
    seen: list[str]
    unseen: list[str]

    @property
    def domains(self) -> list[str]:
        return self.seen + self.unseen

    def save(self, root) -> None:
        root = Path(root)
        for part in ("meta_train", "support", "query", "test", "dev"):
            for dom, pairs in getattr(self, part).items():
                write_pairs(root / dom / part, pairs)
        (root / "domains.txt").write_text(
            "".join(f"seen\t{d}\n" for d in self.seen) + "".join(f"unseen\t{d}\n" for d in self.unseen))

    @classmethod
    def load(cls, root) -> "MetaSplit":
        root = Path(root)
        seen, unseen = [], []
        for line in (root / "domains.txt").read_text().splitlines():
            kind, dom = line.split("\t")
            (seen if kind == "seen" else unseen).append(dom)
        parts = {}
        for part in ("meta_train", "support", "query", "test", "dev"):
            parts[part] = {d: read_pairs(root / d / part) for d in seen + unseen if (root / d / f"{part}.src").exists()}
        return cls(seen=seen, unseen=unseen, **parts)


def make_meta_split(corpora: list[DomainCorpus], config: MetaSplitConfig) -> MetaSplit:
    """Disjoint per-domain samples: test, meta-test support/query, dev, meta-train pool.

    Unseen domains get no meta-train pool.
    """
    by_name = {c.domain: c for c in corpora}
    missing = [d for d in config.seen + config.unseen if d not in by_name]
    if missing:
        raise ValueError(f"no corpus for declared domains {missing}")
    meta_train, support, query, test, dev = {}, {}, {}, {}, {}
    too_small = []
    for idx, dom in enumerate(config.seen + config.unseen):
        pairs = by_name[dom].pairs
        is_seen = dom in config.seen
        sizes = [config.test_size, config.support_size, config.query_size, config.dev_size,
                 config.meta_train_size if is_seen else 0]
        if sum(sizes) > len(pairs):
            too_small.append(f"{dom} (has {len(pairs)}, needs {sum(sizes)})")
            continue
        order = np.random.default_rng([config.seed, 3, idx]).permutation(len(pairs))
        chunks, start = [], 0
        for n in sizes:
            chunks.append([pairs[i] for i in order[start:start + n]])
            start += n
        test[dom], support[dom], query[dom], dev[dom], pool = chunks
        if is_seen:
            meta_train[dom] = pool
    if too_small:
        raise ValueError("domains too small for the requested split sizes: " + ", ".join(too_small))
    return MetaSplit(meta_train, support, query, test, dev, list(config.seen), list(config.unseen))
