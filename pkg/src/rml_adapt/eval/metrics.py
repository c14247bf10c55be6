"""Corpus BLEU and chrF on whitespace-tokenized, case-sensitive text."""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


def _check(hyps: Sequence[str], refs: Sequence[str]) -> None:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise ValueError("no hypotheses to score")


def ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def bleu_stats(hyps: Sequence[str], refs: Sequence[str], max_n: int = 4):
    """Clipped matches and hypothesis n-gram totals per order, plus lengths."""
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = h.split(), r.split()
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, max_n + 1):
            hc, rc = ngrams(ht, n), ngrams(rt, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(ht) - n + 1, 0)
    return matches, totals, hyp_len, ref_len


def bleu(hyps: Sequence[str], refs: Sequence[str], max_n: int = 4) -> float:
    """Corpus BLEU-4 in [0, 100] with exponential smoothing of zero-match orders.

    Orders with no hypothesis n-grams at all are left out of the geometric
    mean.  The k-th remaining order with no matches gets precision
    ``1 / (2^k * total)``.  No unigram match at all scores 0.
    """
    _check(hyps, refs)
    matches, totals, hyp_len, ref_len = bleu_stats(hyps, refs, max_n)
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_p = 0.0
    smooth = 1.0
    orders = 0
    for m, t in zip(matches, totals):
        if t == 0:
            continue
        orders += 1
        if m == 0:
            smooth *= 2.0
            log_p += -math.log(smooth * t)
        else:
            log_p += math.log(m / t)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return min(100.0, 100.0 * bp * math.exp(log_p / orders))


def _char_f(hyp: str, ref: str, max_n: int, beta: float) -> float:
    h = "".join(hyp.split())
    r = "".join(ref.split())
    if h == r:
        return 1.0
    scores = []
    for n in range(1, max_n + 1):
        hc, rc = ngrams(h, n), ngrams(r, n)
        ht, rt = sum(hc.values()), sum(rc.values())
        if ht == 0 and rt == 0:
            continue
        if ht == 0 or rt == 0:
            scores.append(0.0)
            continue
        m = sum(min(c, rc[g]) for g, c in hc.items())
        p, rec = m / ht, m / rt
        b2 = beta * beta
        scores.append(0.0 if m == 0 else (1 + b2) * p * rec / (b2 * p + rec))
    return sum(scores) / len(scores)


def chrf(hyps: Sequence[str], refs: Sequence[str], max_n: int = 6, beta: float = 2.0) -> float:
    """Character n-gram F-beta (spaces removed), averaged over orders, then sentences, x100.

    Orders where neither side has an n-gram are skipped.
    """
    _check(hyps, refs)
    return 100.0 * sum(_char_f(h, r, max_n, beta) for h, r in zip(hyps, refs)) / len(hyps)
