from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..autodiff import Tape, Tensor, ops
from ..corpus.vocab import Vocabulary
from ..model.checkpoint import load_arrays, save_arrays
from ..model.mixing import xavier_uniform
from ..train.optim import Adam

log = logging.getLogger(__name__)

SCHEMES = ("two-label", "many-label")
OTHER = "<other>"


@dataclass
class ClassifierConfig:
    scheme: str = "two-label"
    embed_dim: int = 32
    hidden_dim: int = 32
    epochs: int = 20
    lr: float = 0.01
    batch_size: int = 64
    heldout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.embed_dim < 1 or self.hidden_dim < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("embed_dim, hidden_dim, batch_size must be positive and epochs non-negative")
        if not 0.0 <= self.heldout < 1.0:
            raise ValueError("heldout fraction must lie in [0, 1)")


@dataclass
class SentenceClassifier:
    """Averaged word embedding -> ReLU hidden layer -> softmax over labels.

    ``labels[0]`` is the general domain, so :meth:`score` is ``P(labels[0])``.
    """

    vocab: Vocabulary
    labels: list[str]
    params: dict[str, Tensor]
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    accuracy: float | None = None
    label_counts: dict[str, int] = field(default_factory=dict)

    @classmethod
    def init(cls, vocab: Vocabulary, labels: Sequence[str], config: ClassifierConfig) -> "SentenceClassifier":
        rng = np.random.default_rng([config.seed, 7])
        e, h, n = config.embed_dim, config.hidden_dim, len(labels)
        params = {
            "embed": Tensor(rng.normal(0.0, 0.1, size=(len(vocab), e)), requires_grad=True),
            "hidden.weight": Tensor(xavier_uniform(rng, e, h), requires_grad=True),
            "hidden.bias": Tensor(np.zeros(h), requires_grad=True),
            "out.weight": Tensor(np.zeros((h, n)), requires_grad=True),
            "out.bias": Tensor(np.zeros(n), requires_grad=True),
        }
        return cls(vocab, list(labels), params, config)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def _bag(self, sentences: Sequence[str]) -> np.ndarray:
        bag = np.zeros((len(sentences), len(self.vocab)))
        for i, s in enumerate(sentences):
            ids = self.vocab.encode(s)
            if not ids:
                raise ValueError(f"cannot classify an empty sentence (item {i})")
            np.add.at(bag[i], ids, 1.0 / len(ids))
        return bag

    def _logits(self, bag: np.ndarray) -> Tensor:
        p = self.params
        avg = ops.matmul(Tensor._wrap(bag), p["embed"])
        h = ops.relu(ops.add(ops.matmul(avg, p["hidden.weight"]), p["hidden.bias"]))
        return ops.add(ops.matmul(h, p["out.weight"]), p["out.bias"])

    def predict_proba(self, sentences: Sequence[str]) -> np.ndarray:
        """Label distribution per sentence, shape ``(n, n_labels)``."""
        return ops.softmax(self._logits(self._bag(sentences))).numpy()

    def scores(self, sentences: Sequence[str]) -> np.ndarray:
        return self.predict_proba(sentences)[:, 0]


def score(classifier: SentenceClassifier, sentence: str) -> float:
    """Probability that ``sentence`` belongs to the general domain."""
    return float(classifier.scores([sentence])[0])


def _label_table(domains: Sequence[str], general: str, scheme: str) -> list[str]:
    distinct = list(dict.fromkeys(domains))
    if general not in distinct:
        raise ValueError(f"general domain {general!r} has no training sentences")
    if scheme == "two-label":
        return [general, OTHER]
    return [general] + [d for d in distinct if d != general]


def stratified_split(labels: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    train, held = [], []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        idx = idx[rng.permutation(len(idx))]
        n = int(round(fraction * len(idx)))
        if fraction > 0 and len(idx) > 1:
            n = min(max(n, 1), len(idx) - 1)
        held.extend(idx[:n].tolist())
        train.extend(idx[n:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(held), dtype=np.int64)


def train_classifier(sentences: Sequence[str], domains: Sequence[str], vocab: Vocabulary,
                     config: ClassifierConfig, general: str = "general") -> SentenceClassifier:
    """Fit on ``(sentence, domain)`` examples; held-out accuracy is recorded on the result.

    Examples are put in a canonical order first, so the outcome does not
    depend on the order they were supplied in.
    """
    if len(sentences) != len(domains):
        raise ValueError(f"{len(sentences)} sentences but {len(domains)} labels")
    if not sentences:
        raise ValueError("cannot train a classifier on an empty corpus")
    if len(set(domains)) < 2:
        raise ValueError(f"need at least two distinct domains, got {sorted(set(domains))}")
    if any(not s.split() for s in sentences):
        raise ValueError("training sentences must be non-empty")
    labels = _label_table(domains, general, config.scheme)
    merged = [d if d in labels else OTHER for d in domains]
    examples = sorted(zip(merged, sentences))
    y = np.array([labels.index(d) for d, _ in examples])
    texts = [s for _, s in examples]

    clf = SentenceClassifier.init(vocab, labels, config)
    clf.label_counts = {lab: int(c) for lab, c in sorted(Counter(merged).items())}
    rng = np.random.default_rng([config.seed, 8])
    tr, ho = stratified_split(y, config.heldout, rng)
    bag = clf._bag(texts)
    opt = Adam(lr=config.lr, beta2=0.999, eps=1e-8)
    names = list(clf.params)
    for _ in range(config.epochs):
        order = tr[rng.permutation(len(tr))]
        for start in range(0, len(order), config.batch_size):
            b = order[start:start + config.batch_size]
            with Tape() as tape:
                loss = ops.cross_entropy(clf._logits(bag[b]), y[b])
            g = tape.backward(loss, wrt=[clf.params[n] for n in names])
            opt.step(clf.params, {n: g[clf.params[n]] for n in names})
    eval_idx = ho if len(ho) else tr
    pred = ops.softmax(clf._logits(bag[eval_idx])).numpy().argmax(axis=1)
    clf.accuracy = float((pred == y[eval_idx]).mean())
    log.info("classifier (%s): held-out accuracy %.4f on %d sentences", config.scheme, clf.accuracy, len(eval_idx))
    return clf


def save_classifier(clf: SentenceClassifier, path, extra: dict | None = None) -> None:
    meta = {"kind": "sentence-classifier", "labels": clf.labels, "config": asdict(clf.config),
            "accuracy": clf.accuracy, "label_counts": clf.label_counts, "vocab": clf.vocab.tokens}
    if extra:
        meta["extra"] = extra
    save_arrays(path, {k: v.numpy() for k, v in clf.params.items()}, meta)


def load_classifier(path) -> SentenceClassifier:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "sentence-classifier":
        raise ValueError(f"{path}: holds a {meta.get('kind')!r}, not a classifier")
    params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    return SentenceClassifier(Vocabulary(meta["vocab"]), meta["labels"], params,
                              ClassifierConfig(**meta["config"]), meta["accuracy"], meta["label_counts"])
