import warnings

import numpy as np
import pytest

from rml_adapt.curriculum import (
    CurriculumWarning, ScoredPair, SplitConfig, balance_task, read_manifest, split_tasks,
    write_manifest,
)


def pair(score, domain=0, n_src=1, n_tgt=1, tag=0):
    return ScoredPair([4 + tag] * n_src, [5] * n_tgt, domain, score)


def random_corpus(rng, n=None, n_domains=3, skew=False):
    n = n or int(rng.integers(20, 120))
    out = []
    for i in range(n):
        d = int(rng.integers(n_domains))
        s = float(rng.random())
        if skew:
            s = min(1.0, s * 0.3 + 0.7 * (d == 0))
        out.append(ScoredPair(list(rng.integers(4, 50, size=rng.integers(1, 9))),
                              list(rng.integers(4, 50, size=rng.integers(1, 9))), d, round(s, 2)))
    return out


def quiet_split(pairs, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CurriculumWarning)
        return split_tasks(pairs, cfg)


def test_sort_order_example():
    pairs = [pair(s, tag=i) for i, s in enumerate([0.2, 0.9, 0.1, 0.8])]
    tasks = quiet_split(pairs, SplitConfig(n_tasks=2))
    assert [sorted(p.score for p in t.pairs) for t in tasks] == [[0.8, 0.9], [0.1, 0.2]]


def test_default_budgets():
    cfg = SplitConfig()
    assert (cfg.support_token_budget, cfg.query_token_budget, cfg.n_tasks) == (8000, 16000, 160)


def test_equal_scores_give_stable_chunks():
    pairs = [pair(0.5, tag=i) for i in range(6)]
    tasks = quiet_split(pairs, SplitConfig(n_tasks=3))
    assert [[p.src[0] - 4 for p in t.pairs] for t in tasks] == [[0, 1], [2, 3], [4, 5]]


def test_support_then_query_stop_at_first_overflow():
    pairs = [pair(1.0 - i / 10, n_src=2, n_tgt=2, tag=i) for i in range(6)]  # 4 tokens each
    tasks = quiet_split(pairs, SplitConfig(n_tasks=1, support_token_budget=9, query_token_budget=8))
    assert len(tasks[0].support) == 2 and len(tasks[0].query) == 2


def test_unscored_and_empty_rejected():
    with pytest.raises(ValueError):
        split_tasks([], SplitConfig(n_tasks=1))
    with pytest.raises(ValueError):
        split_tasks([ScoredPair([4], [5], 0, None)], SplitConfig(n_tasks=1))


def test_config_validation():
    for kw in ({"n_tasks": 0}, {"support_token_budget": 0}, {"strategy": "random"}):
        with pytest.raises(ValueError):
            SplitConfig(**kw)


def test_undersupply_warns_and_drops_empty_tasks():
    cfg = SplitConfig(n_tasks=5)
    with pytest.warns(CurriculumWarning):
        tasks = split_tasks([pair(0.5, tag=i) for i in range(3)], cfg)
    assert len(tasks) == 3
    assert [t.index for t in tasks] == [0, 1, 2]
    assert cfg.warnings


@pytest.mark.parametrize("seed", range(100))
def test_token_based_monotone_disjoint_and_within_budget(seed):
    rng = np.random.default_rng(seed)
    corpus = random_corpus(rng)
    cfg = SplitConfig(n_tasks=int(rng.integers(1, 8)), support_token_budget=int(rng.integers(10, 60)),
                      query_token_budget=int(rng.integers(20, 120)))
    tasks = quiet_split(corpus, cfg)
    scores = [[p.score for p in t.pairs] for t in tasks]
    for a, b in zip(scores, scores[1:]):
        if a and b:
            assert min(a) >= max(b)
    ids = [id(p) for t in tasks for p in t.pairs]
    assert len(ids) == len(set(ids))
    for t in tasks:
        assert t.tokens("support") <= cfg.support_token_budget
        assert t.tokens("query") <= cfg.query_token_budget
    assert sum(t.tokens() for t in tasks) <= cfg.n_tasks * (cfg.support_token_budget + cfg.query_token_budget)


@pytest.mark.parametrize("seed", range(100))
def test_balanced_counts_within_one_and_per_domain_monotone(seed):
    rng = np.random.default_rng(1000 + seed)
    corpus = random_corpus(rng, n=int(rng.integers(60, 200)), skew=True)
    cfg = SplitConfig(n_tasks=int(rng.integers(1, 6)), support_token_budget=int(rng.integers(20, 60)),
                      query_token_budget=int(rng.integers(40, 120)), strategy="balanced")
    tasks = quiet_split(corpus, cfg)
    exhausted = any("exhausted" in w for w in cfg.warnings)
    domains = sorted({p.domain for p in corpus})
    for t in tasks:
        assert t.tokens("support") <= cfg.support_token_budget
        assert t.tokens("query") <= cfg.query_token_budget
        if not exhausted:
            counts = [t.domain_counts().get(d, 0) for d in domains]
            assert max(counts) - min(counts) <= 1
    for d in domains:
        seq = [[p.score for p in t.pairs if p.domain == d] for t in tasks]
        flat = [s for chunk in seq for s in chunk]
        assert flat == sorted(flat, reverse=True)
    ids = [id(p) for t in tasks for p in t.pairs]
    assert len(ids) == len(set(ids))


def test_balance_exact_division():
    pools = {d: [pair(0.9 - i / 10, d) for i in range(4)] for d in range(4)}
    s, q = balance_task(pools, [0, 1, 2, 3], 100, 100, slots=8)
    counts = np.bincount([p.domain for p in s + q], minlength=4)
    assert counts.tolist() == [2, 2, 2, 2]


def test_balance_remainder_goes_to_best_scoring_domains():
    pools = {0: [pair(s, 0) for s in (0.5, 0.4, 0.1)],
             1: [pair(s, 1) for s in (0.9, 0.8, 0.3)],
             2: [pair(s, 2) for s in (0.7, 0.6, 0.2)]}
    s, q = balance_task(pools, [0, 1, 2], 100, 100, slots=8)
    counts = np.bincount([p.domain for p in s + q], minlength=3)
    assert counts.tolist() == [2, 3, 3]
    # highest-scored pairs picked first within each domain
    assert [p.score for p in s + q if p.domain == 0] == [0.5, 0.4]


def test_balance_exhaustion_refills_from_other_domains():
    pools = {0: [pair(0.9, 0)], 1: [pair(s, 1) for s in (0.8, 0.7, 0.6, 0.5)]}
    sink = []
    with pytest.warns(CurriculumWarning):
        s, q = balance_task(pools, [0, 1], 100, 100, slots=4, sink=sink)
    assert len(s + q) == 4
    assert any("exhausted" in w for w in sink)


def test_token_based_skews_but_balanced_does_not():
    rng = np.random.default_rng(5)
    corpus = random_corpus(rng, n=400, n_domains=4, skew=True)
    kw = dict(n_tasks=4, support_token_budget=60, query_token_budget=120)
    token = quiet_split(corpus, SplitConfig(**kw))
    balanced = quiet_split(corpus, SplitConfig(strategy="balanced", **kw))
    first = token[0].domain_counts()
    assert first.get(0, 0) > sum(v for d, v in first.items() if d != 0)
    for t in balanced:
        c = [t.domain_counts().get(d, 0) for d in range(4)]
        assert max(c) - min(c) <= 1


def test_manifest_round_trip_and_determinism(tmp_path):
    rng = np.random.default_rng(3)
    corpus = random_corpus(rng, n=50)
    tasks = quiet_split(corpus, SplitConfig(n_tasks=3, support_token_budget=30, query_token_budget=60))
    write_manifest(tasks, tmp_path / "a.tsv")
    write_manifest(quiet_split(corpus, SplitConfig(n_tasks=3, support_token_budget=30, query_token_budget=60)),
                   tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    back = read_manifest(tmp_path / "a.tsv")
    assert [(t.support, t.query) for t in back] == [(t.support, t.query) for t in tasks]
    fields = (tmp_path / "a.tsv").read_text().splitlines()[0].split("\t")
    assert len(fields) == 6 and fields[1] in ("support", "query")
