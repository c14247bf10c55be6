"""Shared test utilities: random expression generator and tiny fixtures."""
from __future__ import annotations

import numpy as np

from rml_adapt.autodiff import Tensor, ops

UNARY = ["softmax", "log_softmax", "exp", "tanh", "relu", "scale", "layer_norm", "transpose", "reshape"]
BINARY = ["matmul", "add", "bias", "multiply", "concat", "embedding", "slice", "domain_mix"]


def random_expression(rng: np.random.Generator, depth: int | None = None):
    """Random differentiable expression over every primitive (shapes at most 8x8).

    Returns ``(fn, params, seed, used)`` where ``fn()`` rebuilds the expression
    from the param tensors and ``seed`` matches its output shape.
    """
    depth = int(rng.integers(2, 6)) if depth is None else depth
    params: list[Tensor] = []

    def leaf(*shape, scale=1.0):
        t = Tensor(rng.normal(size=shape) * scale, requires_grad=True)
        params.append(t)
        return t

    r, c = int(rng.integers(1, 9)), int(rng.integers(2, 9))
    x0 = leaf(r, c)
    plan = []
    shape = (r, c)
    for _ in range(depth):
        name = str(rng.choice(UNARY + BINARY))
        if name == "reshape" and shape[0] * shape[1] > 8 * 8:
            name = "tanh"
        step: dict = {"name": name}
        rr, cc = shape
        if name == "matmul":
            c2 = int(rng.integers(1, 9))
            step["w"] = leaf(cc, c2, scale=1.0 / np.sqrt(cc))
            shape = (rr, c2)
        elif name in ("add", "multiply"):
            step["w"] = leaf(rr, cc)
        elif name == "bias":
            step["w"] = leaf(cc)
        elif name == "layer_norm":
            # two features make layer-norm a near-sign function; FD is unreliable there
            if cc < 3:
                step["name"] = "tanh"
            else:
                step["g"], step["b"] = leaf(cc), leaf(cc)
        elif name == "concat":
            extra = int(rng.integers(1, 4))
            step["axis"] = int(rng.integers(0, 2))
            if step["axis"] == 0:
                step["w"] = leaf(extra, cc)
                shape = (rr + extra, cc)
            else:
                step["w"] = leaf(rr, extra)
                shape = (rr, cc + extra)
            if max(shape) > 8:
                step = {"name": "tanh"}
                shape = (rr, cc)
        elif name == "embedding":
            vocab, n = int(rng.integers(2, 7)), int(rng.integers(1, 5))
            step["w"] = leaf(vocab, cc)
            step["ids"] = rng.integers(0, vocab, size=n)
            shape = (rr + n, cc)
            if shape[0] > 8:
                step["ids"] = step["ids"][: 8 - rr]
                shape = (rr + len(step["ids"]), cc)
                if len(step["ids"]) == 0:
                    step = {"name": "tanh"}
                    shape = (rr, cc)
        elif name == "slice":
            if cc >= 2:
                a = int(rng.integers(0, cc - 1))
                b = int(rng.integers(a + 1, cc + 1))
                step["index"] = (slice(None), slice(a, b))
                shape = (rr, b - a)
            else:
                step = {"name": "tanh"}
        elif name == "domain_mix":
            k = int(rng.integers(1, 4))
            step["k"] = k
            step["w"] = leaf(cc, k * cc, scale=1.0 / np.sqrt(cc))
            step["r"] = leaf(cc, k)
        elif name == "transpose":
            shape = (cc, rr)
        elif name == "reshape":
            step["shape"] = (cc, rr)
            shape = (cc, rr)
        elif name == "scale":
            step["c"] = float(rng.uniform(-2, 2))
        plan.append(step)

    terminal = "cross_entropy" if rng.random() < 0.3 else "seed"
    targets = rng.integers(0, shape[1], size=shape[0])
    weights = rng.uniform(0.5, 1.5, size=shape[0])
    seed = None if terminal == "cross_entropy" else rng.normal(size=shape)

    def fn():
        x = x0
        for st in plan:
            n = st["name"]
            if n == "softmax":
                x = ops.softmax(x)
            elif n == "log_softmax":
                x = ops.log(ops.softmax(x))
            elif n == "exp":
                x = ops.exp(ops.tanh(x))
            elif n == "tanh":
                x = ops.tanh(x)
            elif n == "relu":
                x = ops.relu(x)
            elif n == "scale":
                x = ops.scale(x, st["c"])
            elif n == "layer_norm":
                x = ops.layer_norm(x, st["g"], st["b"])
            elif n == "transpose":
                x = ops.transpose(x, (1, 0))
            elif n == "reshape":
                x = ops.reshape(x, st["shape"])
            elif n == "matmul":
                x = ops.matmul(x, st["w"])
            elif n in ("add", "bias"):
                x = ops.add(x, st["w"])
            elif n == "multiply":
                x = ops.multiply(x, st["w"])
            elif n == "concat":
                x = ops.concat([x, st["w"]], axis=st["axis"])
            elif n == "embedding":
                x = ops.concat([x, ops.embedding(st["w"], st["ids"])], axis=0)
            elif n == "slice":
                x = ops.slice_(x, st["index"])
            elif n == "domain_mix":
                rows, d = x.shape
                y = ops.reshape(ops.matmul(x, st["w"]), (rows, st["k"], d))
                phi = ops.softmax(ops.matmul(x, st["r"]))
                x = ops.domain_mix(y, phi)
        if terminal == "cross_entropy":
            return ops.cross_entropy(x, targets, weights)
        return x

    used = [st["name"] for st in plan] + [terminal]
    return fn, params, seed, used
