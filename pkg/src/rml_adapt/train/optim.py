"""Parameter update rules over ``name -> Tensor`` maps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import NonFiniteError, Tensor


def check_finite_grads(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in parameter block {name!r}")


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm is not None and norm > max_norm:
        s = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * s
    return norm


def sgd_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], lr: float) -> None:
    for name, g in grads.items():
        p = params[name]
        p.data = p.data - lr * g


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    step_count: int = 0
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)

    def step(self, params: dict[str, Tensor], grads: dict[str, np.ndarray], lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        c1 = 1 - self.beta1 ** t
        c2 = 1 - self.beta2 ** t
        for name, g in grads.items():
            m = self.m.get(name)
            v = self.v.get(name)
            m = (1 - self.beta1) * g if m is None else self.beta1 * m + (1 - self.beta1) * g
            v = (1 - self.beta2) * g * g if v is None else self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            p = params[name]
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
