"""Experiment configuration: YAML -> validated dataclasses with field-path errors."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

BASELINES = ("vanilla", "plain-ft", "meta-only", "meta-curriculum-cls", "word-level-adaptive", "rmlnmt")


class ConfigError(ValueError):
    """Validation failure; ``errors`` lists ``path: message`` strings."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class SyntheticCorpus:
    overlap: float = 0.5
    pairs_per_domain: int = 2000
    n_slots: int = 40
    min_len: int = 3
    max_len: int = 8


@dataclass
class CorpusSection:
    synthetic: SyntheticCorpus | None = field(default_factory=SyntheticCorpus)
    files: dict[str, str] = field(default_factory=dict)
    max_len: int = 175
    vocab_cap: int = 40000


@dataclass
class DomainSection:
    seen: list[str] = field(default_factory=lambda: ["general", "dom1", "dom2", "dom3"])
    unseen: list[str] = field(default_factory=lambda: ["dom4", "dom5"])
    general: str = "general"


@dataclass
class SplitSection:
    meta_train_size: int = 2000
    support_size: int = 200
    query_size: int = 400
    test_size: int = 200
    dev_size: int = 0


@dataclass
class ModelSection:
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    enc_layers: int = 2
    dec_layers: int = 2
    epsilon: float = 0.1


@dataclass
class PretrainSection:
    steps: int = 400
    batch_size: int = 64
    lr: float = 2e-3
    warmup: int = 40
    clip: float | None = 1.0


@dataclass
class ClassifierSection:
    scheme: str = "two-label"
    embed_dim: int = 32
    hidden_dim: int = 32
    epochs: int = 20
    lr: float = 0.01
    batch_size: int = 64
    heldout: float = 0.1


@dataclass
class CurriculumSection:
    n_tasks: int = 160
    support_token_budget: int = 8000
    query_token_budget: int = 16000
    strategy: str = "balanced"


@dataclass
class MetaSection:
    alpha: float = 1e-3
    beta: float = 5e-5
    epochs: int = 1
    order: str = "first-order"
    ft_strategy: str = "FT-specific"
    ft_steps: int = 20
    ft_lr: float = 0.1
    ft_batch_size: int = 32


@dataclass
class EvalSection:
    beam_size: int = 5
    max_length: int | None = None
    length_penalty: float = 0.0
    max_length_offset: int = 10
    robustness: list[str] = field(default_factory=lambda: ["meta-only", "rmlnmt"])


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    output_dir: str = "runs"
    baselines: list[str] = field(default_factory=lambda: list(BASELINES))
    corpus: CorpusSection = field(default_factory=CorpusSection)
    domains: DomainSection = field(default_factory=DomainSection)
    split: SplitSection = field(default_factory=SplitSection)
    model: ModelSection = field(default_factory=ModelSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    curriculum: CurriculumSection = field(default_factory=CurriculumSection)
    meta: MetaSection = field(default_factory=MetaSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @property
    def k(self) -> int:
        return len(self.domains.seen)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Digest of everything that affects results (the output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# parsing

def _type_ok(value, tp) -> bool:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        return any(_type_ok(value, a) for a in typing.get_args(tp))
    if tp is type(None):
        return value is None
    if tp is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp in (str, bool):
        return isinstance(value, tp)
    if origin is list:
        (inner,) = typing.get_args(tp)
        return isinstance(value, list) and all(_type_ok(v, inner) for v in value)
    if origin is dict:
        kt, vt = typing.get_args(tp)
        return isinstance(value, dict) and all(_type_ok(k, kt) and _type_ok(v, vt) for k, v in value.items())
    return True


def _dataclass_of(tp):
    for a in (typing.get_args(tp) or (tp,)):
        if dataclasses.is_dataclass(a):
            return a
    return None


def _build(cls, data: Any, path: str, errors: list[str]):
    if not isinstance(data, dict):
        errors.append(f"{path or '<root>'}: expected a mapping, got {type(data).__name__}")
        return cls()
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            errors.append(f"{path}{key}: unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value, tp = data[f.name], hints[f.name]
        sub = _dataclass_of(tp)
        if sub is not None and isinstance(value, dict):
            kwargs[f.name] = _build(sub, value, f"{path}{f.name}.", errors)
        elif sub is not None and value is None and type(None) in typing.get_args(tp):
            kwargs[f.name] = None
        elif not _type_ok(value, tp):
            errors.append(f"{path}{f.name}: expected {getattr(tp, '__name__', tp)}, got {value!r}")
        else:
            kwargs[f.name] = float(value) if tp is float else value
    return cls(**kwargs)


def _positive(errors, path, value, allow_zero=False):
    if value is None:
        return
    if (value < 0) if allow_zero else (value <= 0):
        errors.append(f"{path}: must be {'non-negative' if allow_zero else 'positive'}, got {value}")


def validate(cfg: ExperimentConfig) -> list[str]:
    errors: list[str] = []
    d = cfg.domains
    for i, dom in enumerate(d.unseen):
        if dom in d.seen:
            errors.append(f"domains.unseen[{i}]: {dom!r} is also listed in domains.seen")
    for part in ("seen", "unseen"):
        names = getattr(d, part)
        dup = sorted({x for x in names if names.count(x) > 1})
        if dup:
            errors.append(f"domains.{part}: duplicate domains {dup}")
    if not d.seen:
        errors.append("domains.seen: at least one seen domain is required")
    if d.general not in d.seen:
        errors.append(f"domains.general: {d.general!r} must be one of domains.seen")
    c = cfg.corpus
    if c.synthetic is None and not c.files:
        errors.append("corpus: give either corpus.synthetic or corpus.files")
    if c.synthetic is not None and c.files:
        errors.append("corpus: corpus.synthetic and corpus.files are mutually exclusive")
    if c.files:
        for dom in d.seen + d.unseen:
            if dom not in c.files:
                errors.append(f"corpus.files.{dom}: no file given for declared domain")
        for dom in c.files:
            if dom not in d.seen + d.unseen:
                errors.append(f"corpus.files.{dom}: domain is neither seen nor unseen")
    if c.synthetic is not None:
        s = c.synthetic
        if not 0.0 <= s.overlap <= 1.0:
            errors.append(f"corpus.synthetic.overlap: must lie in [0, 1], got {s.overlap}")
        for name in ("pairs_per_domain", "n_slots", "min_len", "max_len"):
            _positive(errors, f"corpus.synthetic.{name}", getattr(s, name))
        if s.min_len > s.max_len:
            errors.append("corpus.synthetic.min_len: exceeds max_len")
    if c.vocab_cap < 5:
        errors.append(f"corpus.vocab_cap: must be >= 5, got {c.vocab_cap}")
    _positive(errors, "corpus.max_len", c.max_len)
    for name in ("meta_train_size", "support_size", "query_size", "test_size", "dev_size"):
        _positive(errors, f"split.{name}", getattr(cfg.split, name), allow_zero=True)
    for name in ("support_size", "test_size"):
        _positive(errors, f"split.{name}", getattr(cfg.split, name))
    m = cfg.model
    for name in ("d_model", "n_heads", "d_ff", "enc_layers", "dec_layers"):
        _positive(errors, f"model.{name}", getattr(m, name))
    if m.n_heads > 0 and m.d_model % m.n_heads:
        errors.append(f"model.d_model: {m.d_model} is not divisible by model.n_heads={m.n_heads}")
    if not 0.0 < m.epsilon < 1.0:
        errors.append(f"model.epsilon: must lie in (0, 1), got {m.epsilon}")
    for name in ("steps", "batch_size", "lr"):
        _positive(errors, f"pretrain.{name}", getattr(cfg.pretrain, name))
    _positive(errors, "pretrain.warmup", cfg.pretrain.warmup, allow_zero=True)
    _positive(errors, "pretrain.clip", cfg.pretrain.clip)
    cl = cfg.classifier
    if cl.scheme not in ("two-label", "many-label"):
        errors.append(f"classifier.scheme: must be two-label or many-label, got {cl.scheme!r}")
    for name in ("embed_dim", "hidden_dim", "batch_size", "lr"):
        _positive(errors, f"classifier.{name}", getattr(cl, name))
    _positive(errors, "classifier.epochs", cl.epochs, allow_zero=True)
    if not 0.0 <= cl.heldout < 1.0:
        errors.append(f"classifier.heldout: must lie in [0, 1), got {cl.heldout}")
    cu = cfg.curriculum
    for name in ("n_tasks", "support_token_budget", "query_token_budget"):
        _positive(errors, f"curriculum.{name}", getattr(cu, name))
    if cu.strategy not in ("token-based", "balanced"):
        errors.append(f"curriculum.strategy: must be token-based or balanced, got {cu.strategy!r}")
    me = cfg.meta
    _positive(errors, "meta.alpha", me.alpha, allow_zero=True)
    _positive(errors, "meta.beta", me.beta)
    _positive(errors, "meta.epochs", me.epochs)
    if me.order not in ("first-order", "second-order"):
        errors.append(f"meta.order: must be first-order or second-order, got {me.order!r}")
    if me.ft_strategy not in ("FT-specific", "FT-seen", "FT-unseen", "FT-all"):
        errors.append(f"meta.ft_strategy: unknown strategy {me.ft_strategy!r}")
    _positive(errors, "meta.ft_steps", me.ft_steps, allow_zero=True)
    _positive(errors, "meta.ft_lr", me.ft_lr, allow_zero=True)
    _positive(errors, "meta.ft_batch_size", me.ft_batch_size)
    ev = cfg.eval
    _positive(errors, "eval.beam_size", ev.beam_size)
    _positive(errors, "eval.max_length", ev.max_length)
    _positive(errors, "eval.max_length_offset", ev.max_length_offset)
    for i, b in enumerate(cfg.baselines):
        if b not in BASELINES:
            errors.append(f"baselines[{i}]: unknown baseline {b!r}; expected one of {list(BASELINES)}")
    for i, b in enumerate(ev.robustness):
        if b not in cfg.baselines:
            errors.append(f"eval.robustness[{i}]: {b!r} is not among the configured baselines")
        elif b == "vanilla":
            errors.append(f"eval.robustness[{i}]: vanilla is the reference and is never fine-tuned")
    if ev.robustness and "vanilla" not in cfg.baselines:
        errors.append("eval.robustness: needs the vanilla baseline as reference")
    return errors


def parse_config(data: Any, seed: int | None = None) -> ExperimentConfig:
    errors: list[str] = []
    cfg = _build(ExperimentConfig, data if data is not None else {}, "", errors)
    if isinstance(data, dict) and "seed" not in data and seed is None:
        errors.append("seed: must be given explicitly (in the config or with --seed)")
    if seed is not None:
        cfg.seed = seed
    if errors:
        raise ConfigError(errors)
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: not valid YAML ({exc})"]) from exc
    return parse_config(data, seed)
