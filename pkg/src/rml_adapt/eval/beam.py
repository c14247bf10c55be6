"""Batched beam search over an arbitrary next-token scorer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Tensor
from ..model.transformer import BOS, EOS, Batch, MixTransformer

# step_fn(rows, prefixes) -> log-probabilities (len(rows), V); ``rows`` maps
# each prefix to its source sentence, prefixes start with BOS.
StepFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class BeamConfig:
    beam_size: int = 5
    max_length: int | None = None
    length_penalty: float = 0.0
    max_length_offset: int = 10

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_length is not None and self.max_length < 1:
            raise ValueError("max_length must be >= 1")

    def limit(self, src_len: int) -> int:
        """Most tokens (EOS included) a hypothesis may emit for a source of ``src_len``."""
        return self.max_length if self.max_length is not None else src_len + self.max_length_offset


@dataclass
class Hypothesis:
    ids: list[int]
    logprob: float
    truncated: bool = False


def _log_softmax(x: np.ndarray) -> np.ndarray:
    x = x - x.max(axis=-1, keepdims=True)
    return x - np.log(np.exp(x).sum(axis=-1, keepdims=True))


def _norm(logprob: float, length: int, alpha: float) -> float:
    return logprob if alpha == 0 else logprob / length ** alpha


def beam_search(step_fn: StepFn, limits: Sequence[int], config: BeamConfig) -> list[Hypothesis]:
    """Decode ``len(limits)`` sentences at once; ``limits[i]`` caps sentence ``i``'s length.

    Candidates are ranked by cumulative log-probability (stable on ties).
    Walking down the ranking, EOS candidates become finished hypotheses
    and the rest refill the beam until ``beam_size`` are alive.  With no
    length penalty a sentence stops once its best finished score is at
    least its best live score, which is exact because scores only fall.
    """
    B = config.beam_size
    n = len(limits)
    alive: list[list[tuple[list[int], float]]] = [[([], 0.0)] for _ in range(n)]
    finished: list[list[tuple[list[int], float]]] = [[] for _ in range(n)]
    done = [False] * n
    step = 0
    while not all(done):
        step += 1
        rows, prefixes = [], []
        for i in range(n):
            if done[i]:
                continue
            for ids, _ in alive[i]:
                rows.append(i)
                prefixes.append([BOS] + ids)
        logp = np.asarray(step_fn(np.asarray(rows), np.asarray(prefixes, dtype=np.int64)), dtype=np.float64)
        V = logp.shape[1]
        start = 0
        for i in range(n):
            if done[i]:
                continue
            beams = alive[i]
            cand = np.array([s for _, s in beams])[:, None] + logp[start:start + len(beams)]
            start += len(beams)
            flat = cand.reshape(-1)
            order = np.argsort(-flat, kind="stable")
            new_alive = []
            for idx in order:
                b, tok = divmod(int(idx), V)
                ids, score = beams[b][0], float(flat[idx])
                if tok == EOS:
                    finished[i].append((ids, score))
                else:
                    new_alive.append((ids + [tok], score))
                    if len(new_alive) >= B:
                        break
            if step >= limits[i]:
                # out of length: live beams only serve as a truncated fallback
                alive[i] = new_alive
                done[i] = True
                continue
            alive[i] = new_alive
            if not new_alive:
                done[i] = True
            elif finished[i]:
                if config.length_penalty == 0:
                    best_fin = max(s for _, s in finished[i])
                    done[i] = best_fin >= max(s for _, s in new_alive)
                else:
                    done[i] = len(finished[i]) >= B
    out = []
    for i in range(n):
        if finished[i]:
            best = max(finished[i], key=lambda h: _norm(h[1], len(h[0]) + 1, config.length_penalty))
            out.append(Hypothesis(best[0], best[1], False))
        else:
            best = max(alive[i], key=lambda h: _norm(h[1], len(h[0]), config.length_penalty))
            out.append(Hypothesis(best[0], best[1], True))
    return out


def model_step_fn(model: MixTransformer, sources: Sequence[Sequence[int]]) -> tuple[StepFn, list[int]]:
    """Step function decoding ``sources`` with ``model``; the encoder runs once."""
    batch = Batch.from_pairs([(s, [EOS]) for s in sources])
    mem = model.encode(batch.src).data
    src = batch.src

    def step(rows, prefixes):
        logits = model.decode(Tensor._wrap(mem[rows]), src[rows], prefixes).data
        return _log_softmax(np.asarray(logits)[:, -1, :])

    return step, [len(s) for s in sources]


def beam_decode_batch(model: MixTransformer, sources: Sequence[Sequence[int]], config: BeamConfig,
                      chunk: int = 64) -> list[Hypothesis]:
    out: list[Hypothesis] = []
    for start in range(0, len(sources), chunk):
        part = sources[start:start + chunk]
        if any(len(s) == 0 for s in part):
            raise ValueError("cannot decode an empty source sentence")
        step, lens = model_step_fn(model, part)
        out.extend(beam_search(step, [config.limit(n) for n in lens], config))
    return out


def beam_decode(model: MixTransformer, src: Sequence[int], config: BeamConfig) -> Hypothesis:
    """Best hypothesis for one source (ids exclude BOS/EOS)."""
    return beam_decode_batch(model, [src], config)[0]


def greedy_search(step_fn: StepFn, limit: int) -> Hypothesis:
    ids: list[int] = []
    total = 0.0
    for _ in range(limit):
        logp = step_fn(np.array([0]), np.array([[BOS] + ids], dtype=np.int64))[0]
        tok = int(np.argmax(logp))
        total += float(logp[tok])
        if tok == EOS:
            return Hypothesis(ids, total, False)
        ids.append(tok)
    return Hypothesis(ids, total, True)


def greedy_decode(model: MixTransformer, src: Sequence[int], config: BeamConfig) -> Hypothesis:
    step, lens = model_step_fn(model, [src])
    return greedy_search(step, config.limit(lens[0]))
