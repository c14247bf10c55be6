from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import ShapeError, Tensor, ops


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


@dataclass
class DomainProportionLayer:
    """Smoothed softmax over ``k`` domains computed from a ``d``-vector.

    ``phi(w) = (1 - epsilon) * softmax(R w) + epsilon / k``
    """

    R: Tensor
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.R.ndim != 2:
            raise ShapeError(f"R must be k x d, got shape {self.R.shape}")

    @property
    def k(self) -> int:
        return self.R.shape[0]

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    @classmethod
    def zeros(cls, k: int, d: int, epsilon: float = 0.1, name: str | None = None):
        return cls(Tensor(np.zeros((k, d)), requires_grad=True, name=name), epsilon)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ShapeError(f"domain proportion: input dim {x.shape[-1]} vs R shape {self.R.shape}")
        if x.ndim == 1:
            return ops.reshape(self(ops.reshape(x, (1, self.dim))), (self.k,))
        logits = ops.matmul(x, ops.transpose(self.R, (1, 0)))
        smoothed = ops.scale(ops.softmax(logits), 1.0 - self.epsilon)
        return ops.add(smoothed, Tensor._wrap(np.full(self.k, self.epsilon / self.k)))


def domain_proportion(w, layer: DomainProportionLayer) -> np.ndarray:
    """Domain proportion of a single embedding vector (length-k simplex point)."""
    w = w if isinstance(w, Tensor) else Tensor(w)
    if w.shape != (layer.dim,):
        raise ShapeError(f"domain proportion: vector shape {w.shape} vs R shape {layer.R.shape}")
    return np.asarray(layer(w).data)


@dataclass
class Linear:
    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng, d_in: int, d_out: int, name: str = ""):
        return cls(Tensor(xavier_uniform(rng, d_in, d_out), requires_grad=True, name=f"{name}.weight"),
                   Tensor(np.zeros(d_out), requires_grad=True, name=f"{name}.bias"))

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor, collect=None, mask=None) -> Tensor:
        if x.ndim == 1:
            return ops.reshape(self(ops.reshape(x, (1, self.d_in))), (self.d_out,))
        return ops.add(ops.matmul(x, self.weight), self.bias)

    def tensors(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}


@dataclass
class MixedLinear:
    """``k`` per-domain affine maps blended by a per-position domain proportion.

    ``weights`` is stacked as ``(k, d_in, d_out)``, so every domain shares
    one shape by construction.
    """

    weights: Tensor
    biases: Tensor
    proportion: DomainProportionLayer

    def __post_init__(self):
        k, d_in, d_out = self.weights.shape
        if self.proportion.k != k:
            raise ShapeError(f"proportion layer has k={self.proportion.k} but there are {k} weight matrices")
        if self.biases.shape != (k, d_out):
            raise ShapeError(f"biases shape {self.biases.shape} vs expected {(k, d_out)}")
        if self.proportion.dim != d_in:
            raise ShapeError(f"proportion input dim {self.proportion.dim} vs weight input dim {d_in}")

    @classmethod
    def init(cls, rng, k: int, d_in: int, d_out: int, epsilon: float = 0.1, name: str = ""):
        w = np.stack([xavier_uniform(rng, d_in, d_out) for _ in range(k)])
        return cls(Tensor(w, requires_grad=True, name=f"{name}.weights"),
                   Tensor(np.zeros((k, d_out)), requires_grad=True, name=f"{name}.biases"),
                   DomainProportionLayer.zeros(k, d_in, epsilon, name=f"{name}.R"))

    @classmethod
    def from_linear(cls, lin: Linear, k: int = 1, epsilon: float = 0.1, name: str = ""):
        """Every domain starts as a copy of ``lin``."""
        w = np.stack([lin.weight.numpy()] * k)
        b = np.stack([lin.bias.numpy()] * k)
        return cls(Tensor(w, requires_grad=True, name=f"{name}.weights"),
                   Tensor(b, requires_grad=True, name=f"{name}.biases"),
                   DomainProportionLayer.zeros(k, lin.d_in, epsilon, name=f"{name}.R"))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[2]

    def __call__(self, x: Tensor, collect=None, mask=None) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"mixed linear: input {x.shape} vs weights {self.weights.shape}")
        k, d_in, d_out = self.weights.shape
        if x.ndim == 1:
            return ops.reshape(self(ops.reshape(x, (1, d_in)), collect, mask), (d_out,))
        phi = self.proportion(x)
        if collect is not None:
            collect.append((phi, mask))
        flat_w = ops.reshape(ops.transpose(self.weights, (1, 0, 2)), (d_in, k * d_out))
        y = ops.add(ops.matmul(x, flat_w), ops.reshape(self.biases, (k * d_out,)))
        y = ops.reshape(y, x.shape[:-1] + (k, d_out))
        return ops.domain_mix(y, phi)

    def tensors(self) -> dict[str, Tensor]:
        return {"weights": self.weights, "biases": self.biases, "R": self.proportion.R}


def mixed_transform(x, layer: MixedLinear) -> np.ndarray:
    """``sum_j (x W_j + b_j) * phi_j(x)`` for one input vector."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape != (layer.d_in,):
        raise ShapeError(f"mixed transform: input shape {x.shape} vs weights {layer.weights.shape}")
    return np.asarray(layer(x).data)
