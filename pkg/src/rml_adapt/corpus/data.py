from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .vocab import tokenize

log = logging.getLogger(__name__)

MAX_LEN = 175


@dataclass
class DomainCorpus:
    """Parallel sentence pairs from one domain.

    ``stats`` records what :func:`ingest` removed.
    """

    domain: str
    pairs: list[tuple[str, str]]
    provenance: str = "real-file"
    stats: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.pairs)

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.domain.encode())
        for s, t in self.pairs:
            h.update(b"\x00" + s.encode() + b"\x01" + t.encode())
        return h.hexdigest()


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".src", ".tgt") else path


def clean_pairs(pairs, max_len: int = MAX_LEN) -> tuple[list[tuple[str, str]], dict]:
    """Normalize whitespace, drop empty/over-length pairs and exact duplicates."""
    seen = set()
    out = []
    dropped_len = dropped_dup = dropped_empty = 0
    for src, tgt in pairs:
        s, t = tokenize(src), tokenize(tgt)
        if not s or not t:
            dropped_empty += 1
            continue
        if len(s) > max_len or len(t) > max_len:
            dropped_len += 1
            continue
        pair = (" ".join(s), " ".join(t))
        if pair in seen:
            dropped_dup += 1
            continue
        seen.add(pair)
        out.append(pair)
    stats = {"read": len(out) + dropped_len + dropped_dup + dropped_empty, "kept": len(out),
             "duplicates": dropped_dup, "too_long": dropped_len, "empty": dropped_empty}
    return out, stats


def ingest(path, domain: str, max_len: int = MAX_LEN) -> DomainCorpus:
    """Read ``<path>.src`` / ``<path>.tgt`` (line-aligned) into a deduplicated corpus."""
    stem = _stem(path)
    src_path, tgt_path = stem.with_suffix(".src"), stem.with_suffix(".tgt")
    for p in (src_path, tgt_path):
        if not p.exists():
            raise FileNotFoundError(f"corpus file not found: {p}")
    src = src_path.read_text(encoding="utf-8").splitlines()
    tgt = tgt_path.read_text(encoding="utf-8").splitlines()
    if len(src) != len(tgt):
        raise ValueError(f"misaligned corpus {stem}: {len(src)} source lines vs {len(tgt)} target lines")
    pairs, stats = clean_pairs(zip(src, tgt), max_len)
    log.info("ingested %s: %s", domain, stats)
    return DomainCorpus(domain, pairs, "real-file", stats)


def write_pairs(stem, pairs) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".src").write_text("".join(s + "\n" for s, _ in pairs), encoding="utf-8")
    stem.with_suffix(".tgt").write_text("".join(t + "\n" for _, t in pairs), encoding="utf-8")


def read_pairs(stem) -> list[tuple[str, str]]:
    stem = Path(stem)
    src = stem.with_suffix(".src").read_text(encoding="utf-8").splitlines()
    tgt = stem.with_suffix(".tgt").read_text(encoding="utf-8").splitlines()
    if len(src) != len(tgt):
        raise ValueError(f"misaligned corpus {stem}: {len(src)} vs {len(tgt)} lines")
    return list(zip(src, tgt))
