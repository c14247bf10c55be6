"""Dual-number arrays for forward-mode tangents.

A :class:`Dual` carries a value array and a tangent array of the same
shape.  Running the reverse-mode tape on Dual-valued tensors propagates
tangents through both the forward pass and the backward rules, which
gives Hessian-vector products (forward-over-reverse).  Only the numpy
surface used by the primitives in :mod:`rml_adapt.autodiff.ops` is
supported.
"""
from __future__ import annotations

import numpy as np


def value(x):
    """Primal part of ``x`` (plain arrays pass through)."""
    return x.val if isinstance(x, Dual) else x


def tangent(x):
    return x.dot if isinstance(x, Dual) else np.zeros_like(x)


class Dual:
    __slots__ = ("val", "dot")
    __array_priority__ = 100

    def __init__(self, val, dot=None):
        self.val = np.asarray(val, dtype=np.float64)
        self.dot = np.zeros_like(self.val) if dot is None else np.asarray(dot, dtype=np.float64)
        if self.dot.shape != self.val.shape:
            raise ValueError(f"tangent shape {self.dot.shape} != value shape {self.val.shape}")

    # array-like surface
    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def size(self):
        return self.val.size

    @property
    def dtype(self):
        return self.val.dtype

    @property
    def T(self):
        return Dual(self.val.T, self.dot.T)

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, dot={self.dot!r})"

    def copy(self):
        return Dual(self.val.copy(), self.dot.copy())

    def reshape(self, *shape):
        return Dual(self.val.reshape(*shape), self.dot.reshape(*shape))

    def transpose(self, *axes):
        return Dual(self.val.transpose(*axes), self.dot.transpose(*axes))

    def swapaxes(self, a, b):
        return Dual(self.val.swapaxes(a, b), self.dot.swapaxes(a, b))

    def sum(self, axis=None, keepdims=False):
        return Dual(self.val.sum(axis=axis, keepdims=keepdims),
                    self.dot.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.val.mean(axis=axis, keepdims=keepdims),
                    self.dot.mean(axis=axis, keepdims=keepdims))

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.dot[idx])

    def __float__(self):
        return float(self.val)

    # arithmetic
    def __add__(self, other):
        return Dual(self.val + value(other), self.dot + tangent(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Dual(self.val - value(other), self.dot - tangent(other))

    def __rsub__(self, other):
        return Dual(value(other) - self.val, tangent(other) - self.dot)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.dot * other.val + self.val * other.dot)
        return Dual(self.val * other, self.dot * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.dot - q * other.dot) / other.val)
        return Dual(self.val / other, self.dot / other)

    def __rtruediv__(self, other):
        q = value(other) / self.val
        return Dual(q, (tangent(other) - q * self.dot) / self.val)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("Dual exponent not supported")
        return Dual(self.val ** p, p * self.val ** (p - 1) * self.dot)

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val @ other.val, self.dot @ other.val + self.val @ other.dot)
        return Dual(self.val @ other, self.dot @ other)

    def __rmatmul__(self, other):
        return Dual(other @ self.val, other @ self.dot)

    # comparisons act on the primal only; they produce masks, not values
    def __gt__(self, other):
        return self.val > value(other)

    def __lt__(self, other):
        return self.val < value(other)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method == "at" and ufunc is np.add:
            target, idx, vals = inputs
            if not isinstance(target, Dual):
                raise TypeError("add.at target must be Dual when values are Dual")
            np.add.at(target.val, idx, value(vals))
            np.add.at(target.dot, idx, tangent(vals))
            return None
        if method != "__call__" or kwargs:
            return NotImplemented
        if ufunc is np.exp:
            (x,) = inputs
            e = np.exp(x.val)
            return Dual(e, e * x.dot)
        if ufunc is np.log:
            (x,) = inputs
            return Dual(np.log(x.val), x.dot / x.val)
        if ufunc is np.sqrt:
            (x,) = inputs
            r = np.sqrt(x.val)
            return Dual(r, x.dot / (2.0 * r))
        if ufunc is np.tanh:
            (x,) = inputs
            t = np.tanh(x.val)
            return Dual(t, (1.0 - t * t) * x.dot)
        binary = {
            np.add: lambda a, b: a + b if isinstance(a, Dual) else b.__radd__(a),
            np.subtract: lambda a, b: a - b if isinstance(a, Dual) else b.__rsub__(a),
            np.multiply: lambda a, b: a * b if isinstance(a, Dual) else b.__rmul__(a),
            np.true_divide: lambda a, b: a / b if isinstance(a, Dual) else b.__rtruediv__(a),
            np.matmul: lambda a, b: a @ b if isinstance(a, Dual) else b.__rmatmul__(a),
        }
        if ufunc in binary:
            return binary[ufunc](*inputs)
        if ufunc is np.negative:
            return -inputs[0]
        if ufunc in (np.greater, np.less):
            return ufunc(*(value(x) for x in inputs))
        if ufunc is np.isfinite:
            (x,) = inputs
            return np.isfinite(x.val) & np.isfinite(x.dot)
        return NotImplemented


def zeros_like(x):
    if isinstance(x, Dual):
        return Dual(np.zeros_like(x.val), np.zeros_like(x.val))
    return np.zeros_like(x)


def zeros(shape, like):
    """Zeros of ``shape``; Dual when ``like`` is Dual."""
    if isinstance(like, Dual):
        return Dual(np.zeros(shape), np.zeros(shape))
    return np.zeros(shape)


def setitem(target, idx, vals):
    if isinstance(target, Dual):
        target.val[idx] = value(vals)
        target.dot[idx] = tangent(vals)
    else:
        target[idx] = vals


def concatenate(arrays, axis):
    if any(isinstance(a, Dual) for a in arrays):
        return Dual(np.concatenate([value(a) for a in arrays], axis=axis),
                    np.concatenate([tangent(a) for a in arrays], axis=axis))
    return np.concatenate(arrays, axis=axis)


def all_finite(x) -> bool:
    if isinstance(x, Dual):
        return bool(np.isfinite(x.val).all() and np.isfinite(x.dot).all())
    return bool(np.isfinite(x).all())
