from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, ops
from .transformer import PAD, Batch, MixTransformer


@dataclass
class CompositeLoss:
    """Generation loss plus word-level domain-label loss.

    ``graph`` holds the differentiable total when the loss was evaluated
    under a tape.
    """

    gen: float
    mix: float
    total: float
    graph: Tensor | None = field(default=None, repr=False, compare=False)
    gen_graph: Tensor | None = field(default=None, repr=False, compare=False)
    mix_graph: Tensor | None = field(default=None, repr=False, compare=False)


def generation_loss(logits: Tensor, tgt_out: np.ndarray) -> Tensor:
    """Mean cross-entropy over non-pad target positions."""
    b, t, v = logits.shape
    targets = np.asarray(tgt_out).reshape(-1)
    weights = (targets != PAD).astype(np.float64)
    return ops.cross_entropy(ops.reshape(logits, (b * t, v)), targets, weights)


def mixing_loss(collected, domains: np.ndarray, k: int) -> Tensor:
    """Mean ``-log phi_J`` over positions, averaged over every mixed transform.

    ``collected`` holds ``(phi, valid_mask)`` per transform call; ``J`` is the
    sentence's domain label, inherited by each of its words.
    """
    domains = np.asarray(domains)
    onehot = np.eye(k)[domains]
    terms = []
    for phi, valid in collected:
        w = onehot[:, None, :] * np.asarray(valid, dtype=np.float64)[:, :, None]
        w = w / valid.sum()
        terms.append(ops.sum_(ops.multiply(ops.log(phi), Tensor._wrap(w))))
    total = terms[0]
    for t in terms[1:]:
        total = ops.add(total, t)
    return ops.scale(total, -1.0 / len(terms))


def composite_loss(model: MixTransformer, batch: Batch) -> CompositeLoss:
    """Generation cross-entropy plus mixing loss (zero when the model is not mixed)."""
    if model.config.mixed:
        if batch.domains is None:
            raise ValueError("composite loss needs a domain label for every pair")
        if batch.domains.min() < 0 or batch.domains.max() >= model.k:
            raise ValueError(f"domain labels must lie in [0, {model.k}), got {sorted(set(batch.domains.tolist()))}")
    collected: list = [] if model.config.mixed else None
    logits = model.forward(batch.src, batch.tgt_in, collect=collected)
    gen = generation_loss(logits, batch.tgt_out)
    if model.config.mixed:
        mix = mixing_loss(collected, batch.domains, model.k)
    else:
        mix = Tensor._wrap(np.float64(0.0))
    total = ops.add(gen, mix)
    return CompositeLoss(float(gen.item()), float(mix.item()), float(total.item()), total, gen, mix)
