"""Central finite differences and Hessian-vector products."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .dual import Dual
from .tensor import Tape, Tensor


def numerical_grad(fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5,
                   seed: np.ndarray | None = None) -> list[np.ndarray]:
    """Central differences of ``sum(seed * fn())`` w.r.t. each param, perturbing in place."""
    out = []
    for p in params:
        g = np.zeros(p.shape)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = _reduce(fn(), seed)
            flat[i] = orig - step
            fm = _reduce(fn(), seed)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * step)
        out.append(g)
    return out


def _reduce(t: Tensor, seed) -> float:
    v = np.asarray(t.data, dtype=np.float64)
    return float(v.sum() if seed is None else (v * seed).sum())


def max_relative_error(analytic, numeric, atol: float = 1e-7) -> float:
    """Largest ``|a-n| / max(|a|,|n|)`` over entries whose difference exceeds ``atol``."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a, dtype=np.float64)
        n = np.asarray(n, dtype=np.float64)
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        rel = np.where(diff <= atol, 0.0, diff / np.where(scale > 0, scale, 1.0))
        if rel.size:
            worst = max(worst, float(rel.max()))
    return worst


def check_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor], rtol: float = 1e-4,
                    atol: float = 1e-7, step: float = 1e-5, seed: np.ndarray | None = None) -> float:
    """Compare reverse-mode gradients with central differences; returns the max relative error.

    Raises AssertionError when it exceeds ``rtol``.
    """
    with Tape() as tape:
        out = fn()
    grads = tape.backward(out, seed=seed, wrt=params)
    analytic = [np.asarray(grads[p]) for p in params]
    numeric = numerical_grad(fn, params, step=step, seed=seed)
    err = max_relative_error(analytic, numeric, atol=atol)
    if err > rtol:
        raise AssertionError(f"gradient check failed: max relative error {err:.3e} > {rtol:.1e}")
    return err


def hvp(fn: Callable[[], Tensor], params: Sequence[Tensor], vector: Sequence[np.ndarray]):
    """Gradient and Hessian-vector product of scalar ``fn`` at the current params.

    Forward-over-reverse: params carry ``vector`` as tangent through the
    recorded forward pass and its reverse sweep.
    """
    saved = [p.data for p in params]
    try:
        for p, s, v in zip(params, saved, vector):
            p.data = Dual(s, v)
        with Tape() as tape:
            out = fn()
        g = tape.backward(out, wrt=params)
        grads, hv = [], []
        for p in params:
            gp = g[p]
            if isinstance(gp, Dual):
                grads.append(gp.val.copy())
                hv.append(gp.dot.copy())
            else:
                grads.append(np.asarray(gp, dtype=np.float64))
                hv.append(np.zeros(p.shape))
        return grads, hv
    finally:
        for p, s in zip(params, saved):
            p.data = s
