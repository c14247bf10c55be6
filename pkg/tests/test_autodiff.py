import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rml_adapt.autodiff import (
    Dual,
    NonFiniteError,
    ShapeError,
    Tape,
    TapeConsumedError,
    Tensor,
    check_gradients,
    hvp,
    numerical_grad,
    ops,
    record_forward,
)

from helpers import random_expression


def test_softmax_uniform():
    y = ops.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(y.data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_softmax_two_values():
    # e^1/(e^1+e^2) = 1/(1+e) by hand
    y = ops.softmax(Tensor([1.0, 2.0]))
    np.testing.assert_allclose(y.data, [0.26894, 0.73106], atol=1e-5)


def test_softmax_large_logits_stable():
    y = ops.softmax(Tensor([1000.0, 1000.0]))
    np.testing.assert_allclose(y.data, [0.5, 0.5])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 2\)"):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_overflow_raises():
    with pytest.raises(NonFiniteError):
        ops.exp(Tensor([1000.0]))
    with pytest.raises(NonFiniteError):
        ops.log(Tensor([0.0, 1.0]))
    with pytest.raises(NonFiniteError):
        Tensor([np.nan])


def test_half_square_gradient():
    theta = Tensor(1.0, requires_grad=True)
    out, tape = record_forward(lambda: ops.scale(ops.multiply(theta, theta), 0.5))
    g = tape.backward(out)
    assert g[theta] == pytest.approx(1.0, abs=0)


def test_tape_consumed_and_seed_shape():
    x = Tensor(np.ones(3), requires_grad=True)
    out, tape = record_forward(lambda: ops.exp(x))
    with pytest.raises(ShapeError):
        tape.backward(out, seed=np.ones(4))
    tape.backward(out, seed=np.ones(3))
    with pytest.raises(TapeConsumedError):
        tape.backward(out, seed=np.ones(3))


def test_tape_topological_order():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        b = ops.tanh(a)
        c = ops.matmul(b, a)
        ops.sum_(c)
    seen = {id(a)}
    for node in tape.nodes:
        for x in node.inputs:
            if isinstance(x, Tensor) and tape.tracks(x):
                assert id(x) in seen
        seen.add(id(node.out))


def test_softmax_cross_entropy_gradient_is_p_minus_onehot():
    rng = np.random.default_rng(0)
    logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    targets = np.array([0, 3, 4, 1])
    out, tape = record_forward(lambda: ops.cross_entropy(logits, targets))
    g = tape.backward(out)[logits]
    p = np.exp(logits.data) / np.exp(logits.data).sum(1, keepdims=True)
    expected = (p - np.eye(5)[targets]) / 4
    np.testing.assert_allclose(g, expected, atol=1e-14)
    fd = numerical_grad(lambda: ops.cross_entropy(logits, targets), [logits])[0]
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-9)


def test_layer_norm_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=8), requires_grad=True)
    g = Tensor(rng.normal(size=8), requires_grad=True)
    b = Tensor(rng.normal(size=8), requires_grad=True)
    seed = rng.normal(size=8)
    err = check_gradients(lambda: ops.layer_norm(x, g, b), [x, g, b], seed=seed)
    assert err < 1e-4


@pytest.mark.parametrize("seed", range(40))
def test_random_expressions_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    fn, params, s, _ = random_expression(rng)
    check_gradients(fn, params, seed=s)


def test_replay_is_bit_identical():
    rng = np.random.default_rng(3)
    fn, params, _, _ = random_expression(rng, depth=5)
    out, tape = record_forward(fn)
    first = np.array(tape.replay(out), copy=True)
    second = np.array(tape.replay(out), copy=True)
    assert np.array_equal(first, second)
    assert np.array_equal(first, out.data)


def test_replay_tracks_leaf_changes():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    out, tape = record_forward(lambda: ops.sum_(ops.exp(x)))
    x.data = np.array([0.0, 0.0])
    assert tape.replay(out) == pytest.approx(2.0)


def test_gradient_linearity():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)

    def f1():
        return ops.sum_(ops.softmax(ops.matmul(x, w)))

    def f2():
        return ops.sum_(ops.tanh(ops.matmul(x, w)))

    def both():
        return ops.add(f1(), f2())

    grads = []
    for f in (f1, f2, both):
        out, tape = record_forward(f)
        g = tape.backward(out, wrt=[x, w])
        grads.append((g[x], g[w]))
    for i in range(2):
        np.testing.assert_allclose(grads[2][i], grads[0][i] + grads[1][i], rtol=0, atol=1e-12)


def test_bias_add_gradient_sums_leading_axes():
    x = Tensor(np.ones((2, 3, 4)), requires_grad=True)
    b = Tensor(np.zeros(4), requires_grad=True)
    out, tape = record_forward(lambda: ops.sum_(ops.add(x, b)))
    assert np.array_equal(tape.backward(out)[b], np.full(4, 6.0))


def test_add_rejects_general_broadcast():
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((1, 3))))


def test_embedding_out_of_range():
    with pytest.raises(IndexError):
        ops.embedding(Tensor(np.ones((3, 2))), [0, 3])


def test_batched_matmul_gradient():
    rng = np.random.default_rng(7)
    a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 4, 5)), requires_grad=True)
    w = Tensor(rng.normal(size=(5, 2)), requires_grad=True)
    check_gradients(lambda: ops.sum_(ops.tanh(ops.matmul(ops.matmul(a, b), w))), [a, b, w])


def test_masked_softmax_gradient():
    rng = np.random.default_rng(8)
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    mask = np.triu(np.full((3, 3), -1e30), k=1)
    seed = rng.normal(size=(3, 3))
    check_gradients(lambda: ops.softmax(x, mask=mask), [x], seed=seed)
    y = ops.softmax(x, mask=mask)
    assert y.data[0, 1] == 0.0 and y.data[0, 0] == 1.0


def test_dual_arithmetic_matches_finite_differences():
    rng = np.random.default_rng(9)
    a, da = rng.uniform(0.5, 2, size=3), rng.normal(size=3)
    f = lambda v: np.log(v) * np.exp(v) / (v + 1.0) + np.sqrt(v) @ np.ones(3)
    d = f(Dual(a, da))
    h = 1e-6
    fd = (f(a + h * da) - f(a - h * da)) / (2 * h)
    np.testing.assert_allclose(d.dot, fd, rtol=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_hvp_matches_gradient_differences(seed):
    rng = np.random.default_rng(100 + seed)
    fn, params, s, used = random_expression(rng)
    if s is not None:
        base = fn

        def fn():
            return ops.sum_(ops.multiply(base(), Tensor(s)))

    v = [rng.normal(size=p.shape) for p in params]
    _, hv = hvp(fn, params, v)
    h = 1e-5

    def grad_at(offset):
        saved = [p.data.copy() for p in params]
        for p, vi in zip(params, v):
            p.data = p.data + offset * vi
        with Tape() as tape:
            out = fn()
        g = tape.backward(out, wrt=params)
        res = [np.asarray(g[p]) for p in params]
        for p, sv in zip(params, saved):
            p.data = sv
        return res

    gp, gm = grad_at(h), grad_at(-h)
    for a, b, c in zip(hv, gp, gm):
        np.testing.assert_allclose(a, (b - c) / (2 * h), rtol=1e-4, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=8))
def test_softmax_is_a_distribution(xs):
    y = ops.softmax(Tensor(xs)).data
    assert abs(y.sum() - 1.0) < 1e-12
    assert (y >= 0).all()
