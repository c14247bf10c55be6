from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterable

import numpy as np

from .dual import Dual, all_finite, value


class AutodiffError(Exception):
    pass


class ShapeError(AutodiffError, ValueError):
    pass


class NonFiniteError(AutodiffError, OverflowError):
    pass


class TapeConsumedError(AutodiffError, RuntimeError):
    pass


class Tensor:
    """Dense float64 array node.

    ``requires_grad`` marks a leaf whose gradient :meth:`Tape.backward`
    reports.  ``data`` may be a :class:`~rml_adapt.autodiff.dual.Dual`
    while computing Hessian-vector products.
    """

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if not isinstance(data, Dual):
            data = np.array(data, dtype=np.float64)
        if not all_finite(data):
            raise NonFiniteError(f"non-finite entries in tensor {name or ''}".rstrip())
        self.data = data
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, data) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.requires_grad = False
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return len(self.data.shape)

    def numpy(self) -> np.ndarray:
        return np.array(value(self.data), copy=True)

    def item(self) -> float:
        return float(value(self.data))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    # Operator sugar; the primitives live in ops.
    def __add__(self, other):
        from . import ops
        return ops.add(self, _as_tensor(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.add(self, ops.scale(_as_tensor(other, self), -1.0))

    def __rsub__(self, other):
        from . import ops
        return ops.add(ops.scale(self, -1.0), _as_tensor(other, self))

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if not isinstance(other, (int, float)):
            raise TypeError("only division by a Python scalar is supported")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return Tensor._wrap(np.full(like.shape, float(x)))
    return Tensor(x)


@dataclass
class Node:
    op: Any
    inputs: tuple
    attrs: dict
    out: Tensor
    ctx: Any = None


_local = threading.local()


def _stack() -> list:
    s = getattr(_local, "tapes", None)
    if s is None:
        s = _local.tapes = []
    return s


def active_tape() -> "Tape | None":
    s = _stack()
    return s[-1] if s else None


class Gradients(dict):
    """Maps each requested Tensor to its gradient array (keyed by identity)."""

    def __init__(self, pairs: Iterable[tuple[Tensor, Any]] = ()):
        super().__init__()
        self._tensors: dict[int, Tensor] = {}
        for t, g in pairs:
            self[t] = g

    def __setitem__(self, t, g):
        self._tensors[id(t)] = t
        super().__setitem__(id(t), g)

    def __getitem__(self, t):
        return super().__getitem__(id(t))

    def __contains__(self, t):
        return super().__contains__(id(t))

    def get(self, t, default=None):
        return super().get(id(t), default)

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def items(self):
        return [(self._tensors[k], v) for k, v in super().items()]


class Tape:
    """Records primitive applications while active (``with Tape() as tape:``).

    Nodes are appended in execution order, so inputs always precede the
    nodes that consume them.  A tape is single-owner and can be
    differentiated once.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._produced: set[int] = set()
        self._consumed = False

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._produced

    def record(self, op, inputs: tuple, attrs: dict, out: Tensor, ctx) -> None:
        self.nodes.append(Node(op, inputs, attrs, out, ctx))
        self._produced.add(id(out))

    def replay(self, output: Tensor | None = None):
        """Re-evaluate every recorded node from the current leaf values.

        Returns the recomputed value of ``output`` (default: last node).
        """
        vals: dict[int, Any] = {}
        for node in self.nodes:
            args = [vals.get(id(x), x.data) if isinstance(x, Tensor) else x for x in node.inputs]
            out, _ = node.op.forward(*args, **node.attrs)
            vals[id(node.out)] = out
        if output is None:
            output = self.nodes[-1].out
        return vals.get(id(output), output.data)

    def backward(self, output: Tensor, seed=None, wrt: Iterable[Tensor] | None = None) -> Gradients:
        """Reverse sweep from ``output``; returns gradients of tracked leaves.

        ``seed`` defaults to ones (so a scalar output gives plain gradients).
        With ``wrt`` only those tensors are reported (zeros if unreached).
        """
        if self._consumed:
            raise TapeConsumedError("tape already consumed by a previous backward pass")
        if seed is None:
            seed = np.ones(output.shape)
        elif not isinstance(seed, Dual):
            seed = np.asarray(seed, dtype=np.float64)
        if tuple(seed.shape) != output.shape:
            raise ShapeError(f"seed shape {tuple(seed.shape)} does not match output shape {output.shape}")
        self._consumed = True

        grads: dict[int, Any] = {id(output): seed}
        leaves: dict[int, Tensor] = {}
        if output.requires_grad:
            leaves[id(output)] = output
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            needs = tuple(isinstance(x, Tensor) and self.tracks(x) for x in node.inputs)
            in_grads = node.op.backward(node.ctx, g, needs)
            for x, gx, need in zip(node.inputs, in_grads, needs):
                if not need or gx is None:
                    continue
                key = id(x)
                if x.requires_grad:
                    leaves[key] = x
                prev = grads.get(key)
                grads[key] = gx if prev is None else prev + gx
            node.ctx = None

        result = Gradients()
        if wrt is not None:
            for t in wrt:
                g = grads.get(id(t))
                result[t] = np.zeros(t.shape) if g is None else g
        else:
            for key, t in leaves.items():
                result[t] = grads[key]
        return result


def record_forward(fn: Callable[..., Tensor], *args, **kwargs) -> tuple[Tensor, Tape]:
    """Evaluate ``fn`` under a fresh tape; returns ``(value, tape)``."""
    with Tape() as tape:
        out = fn(*args, **kwargs)
    return out, tape


def grad(fn: Callable[[], Tensor], params: list[Tensor]) -> tuple[Tensor, list]:
    """Value of scalar ``fn()`` and its gradient for each of ``params``."""
    with Tape() as tape:
        out = fn()
    g = tape.backward(out, wrt=params)
    return out, [g[p] for p in params]
