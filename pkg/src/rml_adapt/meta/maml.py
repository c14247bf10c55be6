"""MAML over curriculum tasks.

Functions here work on any *learner*: an object with ``parameters()``
(ordered ``name -> Tensor``) and ``clone()``.  Losses come from a
``loss_fn(learner, pairs) -> MetaLoss``; the default is :func:`task_loss`
for :class:`~rml_adapt.model.MixTransformer`.
"""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from ..autodiff import Tape, Tensor, ops
from ..autodiff.gradcheck import hvp
from ..model.loss import composite_loss, generation_loss
from ..model.transformer import Batch
from ..train.optim import check_finite_grads, sgd_step

log = logging.getLogger(__name__)

ORDERS = ("first-order", "second-order")
FT_STRATEGIES = ("FT-specific", "FT-seen", "FT-unseen", "FT-all")


@dataclass
class MetaConfig:
    alpha: float = 1e-3
    beta: float = 5e-5
    epochs: int = 1
    order: str = "first-order"
    ft_strategy: str = "FT-specific"
    word_loss: bool = True
    ft_steps: int = 20
    ft_lr: float = 0.1
    ft_batch_size: int = 32
    divergence: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta <= 0:
            raise ValueError("alpha must be >= 0 and beta > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.ft_strategy not in FT_STRATEGIES:
            raise ValueError(f"ft_strategy must be one of {FT_STRATEGIES}, got {self.ft_strategy!r}")
        if self.ft_steps < 0 or self.ft_lr < 0 or self.ft_batch_size < 1:
            raise ValueError("ft_steps and ft_lr must be non-negative, ft_batch_size positive")


@dataclass
class MetaLoss:
    """Sentence-level loss, word-level composite loss and their sum."""

    sentence: float
    word: float
    total: float
    graph: Tensor | None = field(default=None, repr=False, compare=False)


class MetaDivergenceError(RuntimeError):
    def __init__(self, msg: str, records: list[dict]):
        super().__init__(msg)
        self.records = records


def _batch(pairs) -> Batch:
    if not pairs:
        raise ValueError("task has no pairs")
    return Batch.from_pairs([(p.src, p.tgt) for p in pairs], [p.domain for p in pairs])


def task_loss(model, pairs: Sequence, word_loss: bool = True) -> MetaLoss:
    """Mean token cross-entropy plus (optionally) the composite word-level loss.

    The word term contains the generation loss again, so generation is
    weighted twice in ``total``.
    """
    comp = composite_loss(model, _batch(pairs))
    if not word_loss:
        return MetaLoss(comp.gen, 0.0, comp.gen, comp.gen_graph)
    graph = ops.add(comp.gen_graph, comp.graph)
    return MetaLoss(comp.gen, comp.total, comp.gen + comp.total, graph)


def _grad(model, pairs, loss_fn) -> tuple[MetaLoss, dict[str, np.ndarray]]:
    params = model.parameters()
    with Tape() as tape:
        loss = loss_fn(model, pairs)
    g = tape.backward(loss.graph, wrt=list(params.values()))
    grads = {n: np.asarray(g[t]) for n, t in params.items()}
    check_finite_grads(grads)
    return loss, grads


def _default_loss(config: MetaConfig | None):
    return partial(task_loss, word_loss=True if config is None else config.word_loss)


def inner_update(model, support: Sequence, alpha: float, loss_fn: Callable | None = None):
    """One SGD step on the support loss; returns a new learner, leaving ``model`` untouched."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if not support:
        raise ValueError("support set is empty")
    loss_fn = loss_fn or _default_loss(None)
    _, grads = _grad(model, support, loss_fn)
    adapted = model.clone()
    sgd_step(adapted.parameters(), grads, alpha)
    return adapted


def meta_gradient(model, task, config: MetaConfig, loss_fn: Callable | None = None):
    """Outer gradient for one task.

    Returns ``(grads, adapted, support_loss, query_loss)``.  First-order:
    the query gradient at the adapted parameters.  Second-order: that
    gradient pulled back through the inner step, ``(I - alpha H_s) g_q``,
    with the support Hessian-vector product taken by forward-over-reverse.
    """
    loss_fn = loss_fn or _default_loss(config)
    if not task.support or not task.query:
        raise ValueError(f"task {getattr(task, 'index', '?')} needs non-empty support and query sets")
    s_loss, s_grads = _grad(model, task.support, loss_fn)
    adapted = model.clone()
    sgd_step(adapted.parameters(), s_grads, config.alpha)
    q_loss, q_grads = _grad(adapted, task.query, loss_fn)
    if config.order == "second-order":
        params = model.parameters()
        names = list(params)
        _, hv = hvp(lambda: loss_fn(model, task.support).graph, [params[n] for n in names],
                    [q_grads[n] for n in names])
        q_grads = {n: q_grads[n] - config.alpha * h for n, h in zip(names, hv)}
        check_finite_grads(q_grads)
    return q_grads, adapted, s_loss, q_loss


def meta_step(model, task, config: MetaConfig, loss_fn: Callable | None = None):
    """One outer update; returns ``(new_model, record)``.

    First-order continues from the adapted parameters (two chained SGD
    steps); second-order steps from the original parameters.
    """
    grads, adapted, s_loss, q_loss = meta_gradient(model, task, config, loss_fn)
    new = adapted if config.order == "first-order" else model.clone()
    sgd_step(new.parameters(), grads, config.beta)
    record = {"task_index": int(getattr(task, "index", 0)), "support_loss": s_loss.total,
              "query_loss_sentence": q_loss.sentence, "query_loss_word": q_loss.word}
    return new, record


def meta_train(model, tasks: Sequence, config: MetaConfig, loss_fn: Callable | None = None,
               log_path=None, on_epoch: Callable | None = None):
    """Episodic MAML with a per-task outer update; returns ``(model, records)``.

    Tasks are visited in curriculum order every epoch.  ``records`` holds
    one dict per task visit; with ``log_path`` they are also written as
    JSON lines.  A query loss above ``config.divergence`` aborts.
    """
    if not tasks:
        raise ValueError("meta_train needs at least one task")
    records: list[dict] = []
    out = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        current = model.clone()
        for epoch in range(config.epochs):
            for task in tasks:
                current, rec = meta_step(current, task, config, loss_fn)
                rec = {"epoch": epoch, **rec}
                records.append(rec)
                if out:
                    out.write(json.dumps(rec, sort_keys=True) + "\n")
                q = rec["query_loss_sentence"] + rec["query_loss_word"]
                if not np.isfinite(q) or q > config.divergence:
                    raise MetaDivergenceError(
                        f"meta-training diverged at epoch {epoch}, task {rec['task_index']}: query loss {q:.4g}",
                        records)
            if on_epoch is not None:
                on_epoch(epoch, current)
    finally:
        if out:
            out.close()
    return current, records


# fine-tuning

def finetune_corpora(support: dict[str, list], seen: Sequence[str], unseen: Sequence[str],
                     strategy: str) -> dict[str, list]:
    """Fine-tuning data per resulting model for a strategy."""
    if strategy not in FT_STRATEGIES:
        raise ValueError(f"unknown fine-tuning strategy {strategy!r}; expected one of {FT_STRATEGIES}")
    if strategy == "FT-specific":
        return {d: list(support[d]) for d in list(seen) + list(unseen) if d in support}
    pick = {"FT-seen": list(seen), "FT-unseen": list(unseen), "FT-all": list(seen) + list(unseen)}[strategy]
    return {strategy: [p for d in pick for p in support.get(d, [])]}


def gen_loss(model, pairs) -> Tensor:
    batch = Batch.from_pairs([(p.src, p.tgt) for p in pairs])
    return generation_loss(model.forward(batch.src, batch.tgt_in), batch.tgt_out)


def _finetune_one(model, pairs, config: MetaConfig, seed_key: str):
    tuned = model.clone()
    if config.ft_steps == 0:
        return tuned
    if not pairs:
        raise ValueError(f"no fine-tuning data for {seed_key}")
    rng = np.random.default_rng([config.seed, 13, zlib.crc32(seed_key.encode())])
    params = tuned.parameters()
    names = list(params)
    for _ in range(config.ft_steps):
        if len(pairs) <= config.ft_batch_size:
            chunk = pairs
        else:
            chunk = [pairs[i] for i in rng.choice(len(pairs), config.ft_batch_size, replace=False)]
        with Tape() as tape:
            loss = gen_loss(tuned, chunk)
        g = tape.backward(loss, wrt=[params[n] for n in names])
        grads = {n: g[params[n]] for n in names}
        check_finite_grads(grads)
        sgd_step(params, grads, config.ft_lr)
    return tuned


def finetune(model, support: dict[str, list], config: MetaConfig, seen: Sequence[str] = (),
             unseen: Sequence[str] = ()):
    """Plain-SGD fine-tuning on the generation loss.

    Returns ``(models, counts)``: one model per target (a domain name for
    FT-specific, else the strategy name) and the pair count it saw.
    """
    corpora = finetune_corpora(support, seen, unseen, config.ft_strategy)
    models = {name: _finetune_one(model, pairs, config, name) for name, pairs in corpora.items()}
    return models, {name: len(pairs) for name, pairs in corpora.items()}
