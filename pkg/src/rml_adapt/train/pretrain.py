from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tape
from ..model.loss import composite_loss
from ..model.transformer import Batch, MixTransformer
from .optim import Adam, check_finite_grads, clip_global_norm

log = logging.getLogger(__name__)


@dataclass
class PretrainConfig:
    steps: int = 400
    batch_size: int = 64
    lr: float = 2e-3
    warmup: int = 40
    clip: float | None = 1.0
    seed: int = 0


def batches(pairs: Sequence, batch_size: int, rng: np.random.Generator):
    """Endless stream of reshuffled minibatches (lists of pairs)."""
    n = len(pairs)
    while True:
        order = rng.permutation(n)
        for start in range(0, n - n % batch_size if n >= batch_size else n, batch_size):
            yield [pairs[i] for i in order[start:start + batch_size]]


def pretrain(model: MixTransformer, pairs: Sequence, config: PretrainConfig) -> list[float]:
    """Adam on the composite loss over labeled ``ScoredPair``s; returns per-step totals.

    Plain models get the generation loss alone (their mixing term is zero).
    """
    if not pairs:
        raise ValueError("no pretraining data")
    rng = np.random.default_rng([config.seed, 11])
    opt = Adam(lr=config.lr)
    params = model.parameters()
    names = list(params)
    history = []
    stream = batches(pairs, config.batch_size, rng)
    for step in range(config.steps):
        chunk = next(stream)
        batch = Batch.from_pairs([(p.src, p.tgt) for p in chunk], [p.domain for p in chunk])
        with Tape() as tape:
            loss = composite_loss(model, batch)
        g = tape.backward(loss.graph, wrt=[params[n] for n in names])
        grads = {n: g[params[n]] for n in names}
        check_finite_grads(grads)
        clip_global_norm(grads, config.clip)
        lr = config.lr * min(1.0, (step + 1) / max(config.warmup, 1))
        opt.step(params, grads, lr=lr)
        history.append(loss.total)
        if step % 50 == 0:
            log.debug("pretrain step %d loss %.4f", step, loss.total)
    return history
