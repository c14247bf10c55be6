from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

STRATEGIES = ("token-based", "balanced")


class CurriculumWarning(UserWarning):
    """Under-supplied corpus or exhausted domain during task construction."""


@dataclass(frozen=True)
class ScoredPair:
    src: tuple[int, ...]
    tgt: tuple[int, ...]
    domain: int
    score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "src", tuple(int(i) for i in self.src))
        object.__setattr__(self, "tgt", tuple(int(i) for i in self.tgt))
        if not self.src or not self.tgt:
            raise ValueError("scored pair sides must be non-empty")

    @property
    def n_tokens(self) -> int:
        return len(self.src) + len(self.tgt)


@dataclass
class Task:
    support: list[ScoredPair]
    query: list[ScoredPair]
    index: int = 0

    @property
    def pairs(self) -> list[ScoredPair]:
        return self.support + self.query

    def tokens(self, role: str | None = None) -> int:
        pairs = {"support": self.support, "query": self.query, None: self.pairs}[role]
        return sum(p.n_tokens for p in pairs)

    def domain_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for p in self.pairs:
            out[p.domain] = out.get(p.domain, 0) + 1
        return out


@dataclass
class SplitConfig:
    n_tasks: int = 160
    support_token_budget: int = 8000
    query_token_budget: int = 16000
    strategy: str = "token-based"
    warnings: list[str] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be >= 1")
        if self.support_token_budget <= 0 or self.query_token_budget <= 0:
            raise ValueError("token budgets must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")


def _warn(msg: str, sink: list[str] | None) -> None:
    if sink is not None:
        sink.append(msg)
    warnings.warn(msg, CurriculumWarning, stacklevel=3)


def _fill(pairs: Sequence[ScoredPair], budget: int) -> int:
    """Length of the longest prefix of ``pairs`` that fits in ``budget`` tokens."""
    used = 0
    for i, p in enumerate(pairs):
        if used + p.n_tokens > budget:
            return i
        used += p.n_tokens
    return len(pairs)


def _ranked(pairs: Sequence[ScoredPair]) -> list[ScoredPair]:
    if not pairs:
        raise ValueError("cannot split an empty corpus into tasks")
    missing = [i for i, p in enumerate(pairs) if p.score is None]
    if missing:
        raise ValueError(f"{len(missing)} pairs are unscored (first at index {missing[0]})")
    order = sorted(range(len(pairs)), key=lambda i: -pairs[i].score)  # stable
    return [pairs[i] for i in order]


def split_tasks(pairs: Sequence[ScoredPair], config: SplitConfig) -> list[Task]:
    """Order pairs by descending score and cut them into curriculum tasks.

    Token-based: the ranked list is cut into ``n_tasks`` contiguous chunks of
    near-equal pair count; each chunk fills support then query, each
    stopping at the first pair that would overflow its budget.  Balanced:
    see :func:`balance_task`.  Empty tasks are dropped with a warning.
    """
    ranked = _ranked(pairs)
    total = sum(p.n_tokens for p in ranked)
    wanted = config.n_tasks * (config.support_token_budget + config.query_token_budget)
    if total < wanted:
        _warn(f"corpus holds {total} tokens, fewer than {config.n_tasks} tasks x budgets = {wanted}",
              config.warnings)
    if config.strategy == "balanced":
        tasks = _balanced_tasks(ranked, config)
    else:
        tasks = []
        for chunk in np.array_split(np.arange(len(ranked)), config.n_tasks):
            chunk_pairs = [ranked[i] for i in chunk]
            ns = _fill(chunk_pairs, config.support_token_budget)
            rest = chunk_pairs[ns:]
            nq = _fill(rest, config.query_token_budget)
            tasks.append(Task(chunk_pairs[:ns], rest[:nq]))
    kept = [t for t in tasks if t.support or t.query]
    if len(kept) < config.n_tasks:
        _warn(f"only {len(kept)} of {config.n_tasks} requested tasks could be filled", config.warnings)
    for i, t in enumerate(kept):
        t.index = i
    return kept


def balance_task(pools: dict[int, list[ScoredPair]], domains: Sequence[int], support_budget: int,
                 query_budget: int, slots: int | None = None,
                 sink: list[str] | None = None) -> tuple[list[ScoredPair], list[ScoredPair]]:
    """Draw one task's support and query uniformly across ``domains``.

    ``pools`` maps each domain to its remaining pairs, best score first;
    chosen pairs are removed from it.  Each pick goes to the domain with
    the fewest pairs in the task so far, ties going to the domain whose
    next pair scores highest.  Support fills first, then query, each
    stopping at the first pick that would overflow its budget.  ``slots``
    optionally caps the total number of pairs.  An exhausted domain is
    skipped with a warning and the others keep filling.
    """
    counts = {d: 0 for d in domains}
    exhausted: set[int] = set()
    support: list[ScoredPair] = []
    query: list[ScoredPair] = []
    for target, budget in ((support, support_budget), (query, query_budget)):
        used = 0
        while slots is None or len(support) + len(query) < slots:
            owed = min(counts.values())
            for d in domains:
                if d not in exhausted and counts[d] == owed and not pools.get(d):
                    exhausted.add(d)
                    _warn(f"domain {d} exhausted; remaining slots go to the other domains", sink)
            live = [d for d in domains if pools.get(d)]
            if not live:
                break
            d = min(live, key=lambda d: (counts[d], -pools[d][0].score, domains.index(d)))
            pick = pools[d][0]
            if used + pick.n_tokens > budget:
                break
            pools[d].pop(0)
            used += pick.n_tokens
            counts[d] += 1
            target.append(pick)
    return support, query


def _balanced_tasks(ranked: list[ScoredPair], config: SplitConfig) -> list[Task]:
    domains = sorted({p.domain for p in ranked})
    pools = {d: [p for p in ranked if p.domain == d] for d in domains}
    tasks = []
    for _ in range(config.n_tasks):
        if not any(pools.values()):
            break
        s, q = balance_task(pools, domains, config.support_token_budget, config.query_token_budget,
                            sink=config.warnings)
        tasks.append(Task(s, q))
    return tasks


# manifest

def _fmt_ids(ids, vocab) -> str:
    return " ".join(vocab.tokens[i] for i in ids) if vocab is not None else " ".join(map(str, ids))


def write_manifest(tasks: Sequence[Task], path, vocab=None) -> None:
    """``task_index, role, domain, score, src, tgt`` per line, tab-separated."""
    lines = []
    for t in tasks:
        for role, pairs in (("support", t.support), ("query", t.query)):
            for p in pairs:
                lines.append(f"{t.index}\t{role}\t{p.domain}\t{p.score!r}\t{_fmt_ids(p.src, vocab)}\t{_fmt_ids(p.tgt, vocab)}\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(lines), encoding="utf-8")


def read_manifest(path, vocab=None) -> list[Task]:
    tasks: dict[int, Task] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        idx, role, dom, sc, src, tgt = line.split("\t")
        if vocab is not None:
            s_ids, t_ids = vocab.encode(src), vocab.encode(tgt)
        else:
            s_ids, t_ids = [int(x) for x in src.split()], [int(x) for x in tgt.split()]
        task = tasks.setdefault(int(idx), Task([], [], int(idx)))
        getattr(task, role).append(ScoredPair(s_ids, t_ids, int(dom), float(sc)))
    return [tasks[i] for i in sorted(tasks)]
