from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..autodiff import ShapeError, Tensor, ops
from .mixing import Linear, MixedLinear, xavier_uniform

PAD, BOS, EOS, UNK = 0, 1, 2, 3
NEG_INF = -1e30


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    enc_layers: int = 2
    dec_layers: int = 2
    k: int = 1
    epsilon: float = 0.1
    mixed: bool = True
    vocab_hash: str = ""

    def __post_init__(self):
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ValueError("encoder and decoder need at least one layer each")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")


@dataclass
class Batch:
    """Padded id matrices for a list of (src, tgt) pairs."""

    src: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    domains: np.ndarray | None = None

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Sequence[int], Sequence[int]]], domains=None) -> "Batch":
        if not pairs:
            raise ValueError("empty batch")
        s_len = max(len(s) for s, _ in pairs) + 1
        t_len = max(len(t) for _, t in pairs) + 1
        src = np.zeros((len(pairs), s_len), dtype=np.int64)
        tgt_in = np.zeros((len(pairs), t_len), dtype=np.int64)
        tgt_out = np.zeros((len(pairs), t_len), dtype=np.int64)
        for i, (s, t) in enumerate(pairs):
            if not len(s) or not len(t):
                raise ValueError(f"pair {i} has an empty side")
            src[i, : len(s)] = s
            src[i, len(s)] = EOS
            tgt_in[i, 0] = BOS
            tgt_in[i, 1: len(t) + 1] = t
            tgt_out[i, : len(t)] = t
            tgt_out[i, len(t)] = EOS
        dom = None if domains is None else np.asarray(domains, dtype=np.int64)
        return cls(src, tgt_in, tgt_out, dom)

    def __len__(self):
        return self.src.shape[0]

    @property
    def n_target_tokens(self) -> int:
        return int((self.tgt_out != PAD).sum())


def sinusoid_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def _proj(cfg: ModelConfig, rng, d_in: int, d_out: int, name: str):
    if cfg.mixed:
        return MixedLinear.init(rng, cfg.k, d_in, d_out, cfg.epsilon, name=name)
    return Linear.init(rng, d_in, d_out, name=name)


class LayerNorm:
    def __init__(self, d: int):
        self.gamma = Tensor(np.ones(d), requires_grad=True)
        self.beta = Tensor(np.zeros(d), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)

    def tensors(self):
        return {"gamma": self.gamma, "beta": self.beta}


class Attention:
    """Multi-head attention; all four projections may be domain-mixed."""

    def __init__(self, cfg: ModelConfig, rng, name: str):
        d = cfg.d_model
        self.n_heads = cfg.n_heads
        self.q = _proj(cfg, rng, d, d, f"{name}.q")
        self.k = _proj(cfg, rng, d, d, f"{name}.k")
        self.v = _proj(cfg, rng, d, d, f"{name}.v")
        self.o = _proj(cfg, rng, d, d, f"{name}.o")

    def _heads(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        m = self.n_heads
        x = ops.transpose(ops.reshape(x, (b, t, m, d // m)), (0, 2, 1, 3))
        return ops.reshape(x, (b * m, t, d // m))

    def __call__(self, x: Tensor, mem: Tensor, mask: np.ndarray, x_valid, mem_valid, collect) -> Tensor:
        b, t, d = x.shape
        m = self.n_heads
        q = self._heads(self.q(x, collect, x_valid))
        k = self._heads(self.k(mem, collect, mem_valid))
        v = self._heads(self.v(mem, collect, mem_valid))
        scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(d // m))
        att = ops.softmax(scores, mask=mask)
        h = ops.matmul(att, v)
        h = ops.reshape(ops.transpose(ops.reshape(h, (b, m, t, d // m)), (0, 2, 1, 3)), (b, t, d))
        return self.o(h, collect, x_valid)

    def tensors(self):
        return {"q": self.q, "k": self.k, "v": self.v, "o": self.o}


class FeedForward:
    def __init__(self, cfg: ModelConfig, rng, name: str):
        self.up = _proj(cfg, rng, cfg.d_model, cfg.d_ff, f"{name}.up")
        self.down = _proj(cfg, rng, cfg.d_ff, cfg.d_model, f"{name}.down")

    def __call__(self, x: Tensor, valid, collect) -> Tensor:
        return self.down(ops.relu(self.up(x, collect, valid)), collect, valid)

    def tensors(self):
        return {"up": self.up, "down": self.down}


class EncoderLayer:
    def __init__(self, cfg, rng, name):
        self.ln1, self.ln2 = LayerNorm(cfg.d_model), LayerNorm(cfg.d_model)
        self.attn = Attention(cfg, rng, f"{name}.attn")
        self.ffn = FeedForward(cfg, rng, f"{name}.ffn")

    def __call__(self, x, mask, valid, collect):
        h = self.ln1(x)
        x = ops.add(x, self.attn(h, h, mask, valid, valid, collect))
        return ops.add(x, self.ffn(self.ln2(x), valid, collect))

    def tensors(self):
        return {"ln1": self.ln1, "ln2": self.ln2, "attn": self.attn, "ffn": self.ffn}


class DecoderLayer:
    def __init__(self, cfg, rng, name):
        self.ln1, self.ln2, self.ln3 = (LayerNorm(cfg.d_model) for _ in range(3))
        self.self_attn = Attention(cfg, rng, f"{name}.self_attn")
        self.cross_attn = Attention(cfg, rng, f"{name}.cross_attn")
        self.ffn = FeedForward(cfg, rng, f"{name}.ffn")

    def __call__(self, x, mem, self_mask, cross_mask, valid, mem_valid, collect):
        h = self.ln1(x)
        x = ops.add(x, self.self_attn(h, h, self_mask, valid, valid, collect))
        x = ops.add(x, self.cross_attn(self.ln2(x), mem, cross_mask, valid, mem_valid, collect))
        return ops.add(x, self.ffn(self.ln3(x), valid, collect))

    def tensors(self):
        return {"ln1": self.ln1, "ln2": self.ln2, "ln3": self.ln3, "self_attn": self.self_attn,
                "cross_attn": self.cross_attn, "ffn": self.ffn}


class MixTransformer:
    """Pre-norm encoder-decoder transformer.

    With ``config.mixed`` every attention projection and feed-forward
    matrix is a :class:`MixedLinear` over ``config.k`` domains; otherwise
    they are plain affine maps.  The embedding table (shared by source
    and target) and the output projection are never mixed.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        d = config.d_model
        self.embed = Tensor(xavier_uniform(rng, config.vocab_size, d), requires_grad=True)
        self.encoder = [EncoderLayer(config, rng, f"enc{i}") for i in range(config.enc_layers)]
        self.decoder = [DecoderLayer(config, rng, f"dec{i}") for i in range(config.dec_layers)]
        self.enc_ln = LayerNorm(d)
        self.dec_ln = LayerNorm(d)
        self.out = Linear.init(rng, d, config.vocab_size, name="out")
        self._pos = sinusoid_positions(512, d)

    @property
    def k(self) -> int:
        return self.config.k

    # parameters

    def parameters(self) -> dict[str, Tensor]:
        """Flat, ordered ``name -> Tensor`` map of every trainable array."""
        out: dict[str, Tensor] = {"embed": self.embed}

        def walk(prefix, obj):
            if isinstance(obj, Tensor):
                out[prefix] = obj
                return
            for key, val in obj.tensors().items():
                walk(f"{prefix}.{key}", val)

        for i, layer in enumerate(self.encoder):
            walk(f"enc.{i}", layer)
        walk("enc_ln", self.enc_ln)
        for i, layer in enumerate(self.decoder):
            walk(f"dec.{i}", layer)
        walk("dec_ln", self.dec_ln)
        walk("out", self.out)
        return out

    def mixed_layers(self) -> list[MixedLinear]:
        found = []

        def walk(obj):
            if isinstance(obj, MixedLinear):
                found.append(obj)
            elif not isinstance(obj, Tensor) and hasattr(obj, "tensors"):
                for val in obj.tensors().values():
                    walk(val)

        for layer in self.encoder + self.decoder:
            walk(layer)
        return found

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.numpy() for name, t in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise KeyError(f"state mismatch; missing={missing[:5]} unexpected={extra[:5]}")
        for name, t in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ShapeError(f"{name}: stored shape {arr.shape} vs model shape {t.shape}")
            t.data = arr.copy()

    def clone(self) -> "MixTransformer":
        return copy.deepcopy(self)

    def n_parameters(self) -> int:
        return sum(int(np.prod(t.shape)) for t in self.parameters().values())

    # forward

    def _embed(self, ids: np.ndarray) -> Tensor:
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise IndexError(f"token id out of vocabulary range [0, {self.config.vocab_size})")
        b, t = ids.shape
        if t > self._pos.shape[0]:
            self._pos = sinusoid_positions(t, self.config.d_model)
        x = ops.scale(ops.embedding(self.embed, ids), math.sqrt(self.config.d_model))
        return ops.add(x, Tensor._wrap(np.broadcast_to(self._pos[:t], (b, t, self.config.d_model))))

    def encode(self, src: np.ndarray, collect=None) -> Tensor:
        src = np.asarray(src)
        valid = src != PAD
        b, s = src.shape
        mask = _key_mask(valid, s, self.config.n_heads)
        x = self._embed(src)
        for layer in self.encoder:
            x = layer(x, mask, valid, collect)
        return self.enc_ln(x)

    def decode(self, mem: Tensor, src: np.ndarray, tgt_in: np.ndarray, collect=None) -> Tensor:
        tgt_in = np.asarray(tgt_in)
        src_valid = np.asarray(src) != PAD
        valid = tgt_in != PAD
        b, t = tgt_in.shape
        m = self.config.n_heads
        causal = np.triu(np.full((t, t), NEG_INF), k=1)
        self_mask = np.broadcast_to(causal, (b * m, t, t))
        cross_mask = np.broadcast_to(
            np.repeat(np.where(src_valid, 0.0, NEG_INF), m, axis=0)[:, None, :], (b * m, t, src_valid.shape[1]))
        x = self._embed(tgt_in)
        for layer in self.decoder:
            x = layer(x, mem, self_mask, cross_mask, valid, src_valid, collect)
        return self.out(self.dec_ln(x))

    def forward(self, src: np.ndarray, tgt_in: np.ndarray, collect=None) -> Tensor:
        """Next-token logits, shape ``(batch, target_len, vocab)``."""
        src, tgt_in = np.asarray(src), np.asarray(tgt_in)
        if src.ndim != 2 or tgt_in.ndim != 2 or src.shape[0] != tgt_in.shape[0]:
            raise ShapeError(f"forward: src {src.shape} and tgt_in {tgt_in.shape} must be batch-aligned")
        mem = self.encode(src, collect)
        return self.decode(mem, src, tgt_in, collect)


def _key_mask(valid: np.ndarray, t_q: int, heads: int) -> np.ndarray:
    b, s = valid.shape
    m = np.repeat(np.where(valid, 0.0, NEG_INF), heads, axis=0)[:, None, :]
    return np.broadcast_to(m, (b * heads, t_q, s))


def forward(model: MixTransformer, src: Sequence[int], tgt_prefix: Sequence[int]) -> np.ndarray:
    """Logits ``(len(tgt_prefix), vocab)`` for one source sentence and target prefix."""
    if not len(src) or not len(tgt_prefix):
        raise ValueError("source and target prefix must be non-empty")
    logits = model.forward(np.asarray([src]), np.asarray([tgt_prefix]))
    return np.asarray(logits.data)[0]


def parameter_count_formula(cfg: ModelConfig) -> int:
    """Closed-form parameter count of a model built from ``cfg``."""
    d, f, v, k = cfg.d_model, cfg.d_ff, cfg.vocab_size, cfg.k

    def lin(d_in, d_out):
        if cfg.mixed:
            return k * (d_in * d_out + d_out) + k * d_in
        return d_in * d_out + d_out

    attn = 4 * lin(d, d)
    ffn = lin(d, f) + lin(f, d)
    ln = 2 * d
    enc = cfg.enc_layers * (attn + ffn + 2 * ln)
    dec = cfg.dec_layers * (2 * attn + ffn + 3 * ln)
    return v * d + enc + dec + 2 * ln + d * v + v


def config_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)
