"""Differentiable primitives.

Each primitive is a stateless object with ``forward(*values, **attrs)``
returning ``(out, ctx)`` and ``backward(ctx, g, needs)`` returning one
gradient per input.  Rules are written against the array surface that
:class:`~rml_adapt.autodiff.dual.Dual` also implements, so the same code
runs for Hessian-vector products.

Broadcasting is limited to adding a 1-D bias over leading axes.
"""
from __future__ import annotations

import numpy as np

from . import dual as D
from .tensor import NonFiniteError, ShapeError, Tensor, active_tape


def _apply(op, inputs: tuple, **attrs) -> Tensor:
    vals = [x.data if isinstance(x, Tensor) else x for x in inputs]
    out_val, ctx = op.forward(*vals, **attrs)
    if not D.all_finite(out_val):
        raise NonFiniteError(f"{op.name}: non-finite value produced")
    out = Tensor._wrap(out_val)
    tape = active_tape()
    if tape is not None and any(isinstance(x, Tensor) and tape.tracks(x) for x in inputs):
        tape.record(op, inputs, attrs, out, ctx)
    return out


def _check_tensor(x, what: str):
    if not isinstance(x, Tensor):
        raise TypeError(f"{what}: expected Tensor, got {type(x).__name__}")


def _fold_leading(g, n: int):
    """Sum ``g`` over all axes but the last (bias gradients)."""
    return g.reshape(-1, n).sum(axis=0)


class _Add:
    name = "add"

    @staticmethod
    def forward(a, b):
        return a + b, (a.shape, b.shape)

    @staticmethod
    def backward(ctx, g, needs):
        sa, sb = ctx
        gb = None
        if needs[1]:
            gb = g if sb == sa else _fold_leading(g, sb[0])
        return (g if needs[0] else None), gb


class _Scale:
    name = "scale"

    @staticmethod
    def forward(a, c):
        return a * c, c

    @staticmethod
    def backward(ctx, g, needs):
        return (g * ctx,)


class _Multiply:
    name = "multiply"

    @staticmethod
    def forward(a, b):
        return a * b, (a, b)

    @staticmethod
    def backward(ctx, g, needs):
        a, b = ctx
        return (g * b if needs[0] else None), (g * a if needs[1] else None)


class _Matmul:
    name = "matmul"

    @staticmethod
    def forward(a, b):
        if a.ndim > 2 and b.ndim == 2:
            # one large GEMM beats numpy's stacked loop
            out = (a.reshape(-1, a.shape[-1]) @ b).reshape(a.shape[:-1] + (b.shape[1],))
        else:
            out = a @ b
        return out, (a, b)

    @staticmethod
    def backward(ctx, g, needs):
        a, b = ctx
        ga = gb = None
        if needs[0]:
            if a.ndim > 2 and b.ndim == 2:
                ga = (g.reshape(-1, g.shape[-1]) @ b.swapaxes(0, 1)).reshape(a.shape)
            else:
                ga = g @ b.swapaxes(-1, -2)
        if needs[1]:
            if b.ndim == 2 and a.ndim > 2:
                m = a.shape[-1]
                gb = a.reshape(-1, m).swapaxes(0, 1) @ g.reshape(-1, g.shape[-1])
            else:
                gb = a.swapaxes(-1, -2) @ g
        return ga, gb


class _Softmax:
    name = "softmax"

    @staticmethod
    def forward(x, mask=None):
        if mask is not None:
            x = x + mask
        m = D.value(x).max(axis=-1, keepdims=True)
        e = np.exp(x - m)
        y = e / e.sum(axis=-1, keepdims=True)
        return y, y

    @staticmethod
    def backward(y, g, needs):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)


class _Log:
    name = "log"

    @staticmethod
    def forward(x):
        if (D.value(x) <= 0).any():
            raise NonFiniteError("log: non-positive input")
        return np.log(x), x

    @staticmethod
    def backward(x, g, needs):
        # overflow is reported by the finite check on the gradient
        with np.errstate(over="ignore"):
            return (g / x,)


class _Exp:
    name = "exp"

    @staticmethod
    def forward(x):
        with np.errstate(over="ignore"):
            y = np.exp(x)
        return y, y

    @staticmethod
    def backward(y, g, needs):
        return (g * y,)


class _Relu:
    name = "relu"

    @staticmethod
    def forward(x):
        mask = D.value(x) > 0
        return x * mask, mask

    @staticmethod
    def backward(mask, g, needs):
        return (g * mask,)


class _Tanh:
    name = "tanh"

    @staticmethod
    def forward(x):
        y = np.tanh(x)
        return y, y

    @staticmethod
    def backward(y, g, needs):
        return (g * (1.0 - y * y),)


class _LayerNorm:
    name = "layer_norm"

    @staticmethod
    def forward(x, gamma, beta, eps=1e-5):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = (var + eps) ** -0.5
        xhat = xc * inv
        return xhat * gamma + beta, (xhat, inv, gamma)

    @staticmethod
    def backward(ctx, g, needs):
        xhat, inv, gamma = ctx
        d = xhat.shape[-1]
        gx = ggamma = gbeta = None
        if needs[0]:
            gh = g * gamma
            gx = (gh - gh.mean(axis=-1, keepdims=True)
                  - xhat * (gh * xhat).mean(axis=-1, keepdims=True)) * inv
        if needs[1]:
            ggamma = _fold_leading(g * xhat, d)
        if needs[2]:
            gbeta = _fold_leading(g, d)
        return gx, ggamma, gbeta


class _Embedding:
    name = "embedding"

    @staticmethod
    def forward(table, ids):
        return table[ids], (table.shape, ids, table)

    @staticmethod
    def backward(ctx, g, needs):
        shape, ids, table = ctx
        out = D.zeros(shape, like=g if isinstance(g, D.Dual) else table)
        np.add.at(out, ids.ravel(), g.reshape(-1, shape[1]))
        return out, None


class _Concat:
    name = "concat"

    @staticmethod
    def forward(*xs, axis=0):
        sizes = [x.shape[axis] for x in xs]
        return D.concatenate(list(xs), axis=axis), (sizes, axis)

    @staticmethod
    def backward(ctx, g, needs):
        sizes, axis = ctx
        ax = axis % g.ndim
        out, start = [], 0
        for n, need in zip(sizes, needs):
            idx = (slice(None),) * ax + (slice(start, start + n),)
            out.append(g[idx] if need else None)
            start += n
        return tuple(out)


class _Slice:
    name = "slice"

    @staticmethod
    def forward(x, index=None):
        return x[index], (x.shape, index, x)

    @staticmethod
    def backward(ctx, g, needs):
        shape, index, x = ctx
        out = D.zeros(shape, like=g if isinstance(g, D.Dual) else x)
        D.setitem(out, index, g)
        return (out,)


class _Reshape:
    name = "reshape"

    @staticmethod
    def forward(x, shape=None):
        return x.reshape(shape), x.shape

    @staticmethod
    def backward(orig, g, needs):
        return (g.reshape(orig),)


class _Transpose:
    name = "transpose"

    @staticmethod
    def forward(x, axes=None):
        return x.transpose(axes), axes

    @staticmethod
    def backward(axes, g, needs):
        return (g.transpose(tuple(np.argsort(axes))),)


class _Sum:
    name = "sum"

    @staticmethod
    def forward(x):
        return x.sum(), x.shape

    @staticmethod
    def backward(shape, g, needs):
        return (g * np.ones(shape),)


class _DomainMix:
    name = "domain_mix"

    @staticmethod
    def forward(y, phi):
        return (phi[..., None, :] @ y)[..., 0, :], (y, phi)

    @staticmethod
    def backward(ctx, g, needs):
        y, phi = ctx
        gy = gphi = None
        if needs[0]:
            gy = phi[..., :, None] * g[..., None, :]
        if needs[1]:
            gphi = (y @ g[..., :, None])[..., 0]
        return gy, gphi


class _CrossEntropy:
    name = "cross_entropy"

    @staticmethod
    def forward(logits, targets, weights=None):
        n = logits.shape[0]
        rows = np.arange(n)
        m = D.value(logits).max(axis=-1, keepdims=True)
        z = logits - m
        e = np.exp(z)
        s = e.sum(axis=-1, keepdims=True)
        logp_t = z[rows, targets] - np.log(s[:, 0])
        w = np.ones(n) if weights is None else weights
        total = float(w.sum())
        loss = -(logp_t * w).sum() / total
        return loss, (e / s, targets, w / total)

    @staticmethod
    def backward(ctx, g, needs):
        p, targets, w = ctx
        onehot = np.zeros(p.shape)
        onehot[np.arange(len(targets)), targets] = 1.0
        return ((p - onehot) * w[:, None] * g,)


# public functional surface

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_tensor(a, "add")
    _check_tensor(b, "add")
    if a.shape != b.shape and not (b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    return _apply(_Add, (a, b))


def scale(a: Tensor, c: float) -> Tensor:
    return _apply(_Scale, (a,), c=float(c))


def multiply(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"multiply: shapes {a.shape} and {b.shape} differ")
    return _apply(_Multiply, (a, b))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_tensor(a, "matmul")
    _check_tensor(b, "matmul")
    sa, sb = a.shape, b.shape
    ok = a.ndim >= 2 and b.ndim >= 2 and sa[-1] == sb[-2]
    if ok and b.ndim > 2:
        ok = sa[:-2] == sb[:-2]
    if not ok:
        raise ShapeError(f"matmul: cannot multiply shapes {sa} and {sb}")
    return _apply(_Matmul, (a, b))


def softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; ``mask`` is an additive constant array."""
    if mask is not None and tuple(mask.shape) != x.shape:
        raise ShapeError(f"softmax: mask shape {tuple(mask.shape)} vs input {x.shape}")
    return _apply(_Softmax, (x,), mask=mask)


def log(x: Tensor) -> Tensor:
    return _apply(_Log, (x,))


def exp(x: Tensor) -> Tensor:
    return _apply(_Exp, (x,))


def relu(x: Tensor) -> Tensor:
    return _apply(_Relu, (x,))


def tanh(x: Tensor) -> Tensor:
    return _apply(_Tanh, (x,))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gamma.shape} / bias {beta.shape} vs feature dim {d}")
    return _apply(_LayerNorm, (x, gamma, beta), eps=eps)


def embedding(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("embedding: ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding: id out of range for table with {table.shape[0]} rows")
    return _apply(_Embedding, (table, ids))


def concat(xs: list[Tensor], axis: int = 0) -> Tensor:
    ref = xs[0].shape
    ax = axis % len(ref)
    for x in xs[1:]:
        if len(x.shape) != len(ref) or any(
                s != r for i, (s, r) in enumerate(zip(x.shape, ref)) if i != ax):
            raise ShapeError(f"concat: shapes {ref} and {x.shape} disagree off axis {axis}")
    return _apply(_Concat, tuple(xs), axis=axis)


def slice_(x: Tensor, index) -> Tensor:
    return _apply(_Slice, (x,), index=index)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        np.empty(x.shape, dtype=np.int8).reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from None
    return _apply(_Reshape, (x,), shape=shape)


def transpose(x: Tensor, axes) -> Tensor:
    return _apply(_Transpose, (x,), axes=tuple(axes))


def sum_(x: Tensor) -> Tensor:
    return _apply(_Sum, (x,))


def mean(x: Tensor) -> Tensor:
    return scale(sum_(x), 1.0 / max(1, int(np.prod(x.shape))))


def domain_mix(y: Tensor, phi: Tensor) -> Tensor:
    """Weighted sum over the domain axis: ``y (..., k, d)``, ``phi (..., k)``."""
    if y.ndim < 2 or y.shape[:-1] != phi.shape:
        raise ShapeError(f"domain_mix: per-domain outputs {y.shape} vs proportions {phi.shape}")
    return _apply(_DomainMix, (y, phi))


def cross_entropy(logits: Tensor, targets, weights=None) -> Tensor:
    """Weighted mean of ``-log softmax(logits)[i, targets[i]]``."""
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise IndexError("cross_entropy: target id out of range")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != targets.shape or weights.sum() <= 0:
            raise ValueError("cross_entropy: weights must match targets and have positive sum")
    return _apply(_CrossEntropy, (logits, targets), weights=weights)


def constant(x) -> Tensor:
    """Untracked tensor."""
    return Tensor(x)


PRIMITIVES = {
    "add": add, "scale": scale, "multiply": multiply, "matmul": matmul, "softmax": softmax,
    "log": log, "exp": exp, "relu": relu, "tanh": tanh, "layer_norm": layer_norm,
    "embedding": embedding, "concat": concat, "slice": slice_, "reshape": reshape,
    "transpose": transpose, "sum": sum_, "domain_mix": domain_mix, "cross_entropy": cross_entropy,
}
