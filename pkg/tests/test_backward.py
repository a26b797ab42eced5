import threading

import numpy as np
import pytest

from scaresnet.errors import ShapeError, ValidationError
from scaresnet.tensor import (
    Graph,
    Tensor,
    active_graph,
    backward,
    finite_diff_grad,
    max_relative_error,
)
from scaresnet.tensor import functional as F


def _check_input_grad(fn, x):
    """Analytic vs central-difference gradient of sum(fn(x) * r)."""
    out = fn(x)
    r = Tensor(np.random.default_rng(7).standard_normal(out.shape), dtype="float64")

    def loss(t):
        return F.sum_all(F.mul(fn(t), r))

    with Graph() as graph:
        root = loss(x)
    graph.backward(root)
    numeric = finite_diff_grad(loss, x)
    return max_relative_error(x.grad, numeric.data)


def test_graph_context_installs_and_restores():
    assert active_graph() is None
    with Graph() as graph:
        assert active_graph() is graph
        out = F.relu(Tensor(np.array([1.0, -1.0])))
    assert active_graph() is None
    assert graph.owns(out)
    assert len(graph) == 2


def test_ops_outside_graph_are_not_recorded():
    out = F.relu(Tensor(np.array([1.0])))
    assert out.node is None


def test_backward_requires_scalar_root(randn):
    x = randn(2, 2)
    with Graph() as graph:
        y = F.relu(x)
    with pytest.raises(ShapeError):
        backward(graph, y)


def test_backward_root_must_belong_to_graph(randn):
    with Graph() as graph:
        F.sum_all(randn(2))
    stray = F.sum_all(randn(2))
    with pytest.raises(ValidationError):
        backward(graph, stray)


def test_graph_rejects_mixed_dtypes():
    with Graph():
        F.relu(Tensor(np.ones(2), dtype="float32"))
        with pytest.raises(ValidationError):
            F.relu(Tensor(np.ones(2), dtype="float64"))


def test_shared_input_accumulates(randn):
    x = randn(3)
    with Graph() as graph:
        loss = F.sum_all(F.mul(x, x))
    graph.backward(loss)
    np.testing.assert_allclose(x.grad, 2 * x.data)


def test_unreached_tensor_has_no_grad(randn):
    x, y = randn(3), randn(3)
    with Graph() as graph:
        loss = F.sum_all(x)
        F.relu(y)
    graph.backward(loss)
    assert y.grad is None
    np.testing.assert_array_equal(x.grad, np.ones(3))


def test_backward_twice_overwrites(randn):
    x = randn(4)
    with Graph() as graph:
        loss = F.sum_all(F.scale(x, 3.0))
    graph.backward(loss)
    graph.backward(loss)
    np.testing.assert_allclose(x.grad, np.full(4, 3.0))


def test_independent_graphs_on_threads(randn):
    xs = [randn(5) for _ in range(4)]
    errors = []

    def work(x):
        try:
            with Graph() as graph:
                loss = F.sum_all(F.mul(x, x))
            graph.backward(loss)
            np.testing.assert_allclose(x.grad, 2 * x.data)
        except AssertionError as e:
            errors.append(e)

    threads = [threading.Thread(target=work, args=(x,)) for x in xs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


@pytest.mark.parametrize(
    "name,fn,shape",
    [
        ("relu", lambda t: F.relu(t), (3, 4)),
        ("sigmoid", lambda t: F.sigmoid(t), (3, 4)),
        ("softmax", lambda t: F.softmax(t), (2, 3, 5)),
        ("transpose", lambda t: F.transpose(t, (1, 2, 0)), (2, 3, 4)),
        ("slice", lambda t: F.slice_axis(t, 1, 1, 3), (2, 4, 3)),
        ("reshape", lambda t: F.reshape(t, (6, 4)), (2, 3, 4)),
        ("gap", lambda t: F.global_avg_pool(t), (3, 4, 5)),
        ("mean", lambda t: F.mean_all(t), (3, 4)),
        ("maxpool", lambda t: F.maxpool2d(t, kernel=3, stride=2, padding=1), (2, 7, 6)),
    ],
)
def test_unary_gradients(name, fn, shape, randn):
    assert _check_input_grad(fn, randn(*shape)) < 1e-5


def test_conv2d_gradients(randn):
    x, w, b = randn(3, 6, 5), randn(4, 3, 3, 3), randn(4)
    r = randn(4, 3, 3)

    def run():
        return F.sum_all(F.mul(F.conv2d(x, w, b, stride=2, padding=1), r))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    for t in (x, w, b):
        analytic = t.grad.copy()
        numeric = finite_diff_grad(lambda v, t=t: _swap(t, v, run), t)
        assert max_relative_error(analytic, numeric.data) < 1e-5


def _swap(target, value, fn):
    original = target.data
    target.data = value.data
    try:
        return fn()
    finally:
        target.data = original


def test_depthwise_and_pointwise_gradients(randn):
    x, dw, pw, pb = randn(3, 5, 5), randn(3, 1, 3, 3), randn(2, 3), randn(2)
    r = randn(2, 5, 5)

    def run():
        y = F.depthwise_conv2d(x, dw, padding=1)
        return F.sum_all(F.mul(F.pointwise_conv2d(y, pw, pb), r))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    for t in (x, dw, pw, pb):
        analytic = t.grad.copy()
        numeric = finite_diff_grad(lambda v, t=t: _swap(t, v, run), t)
        assert max_relative_error(analytic, numeric.data) < 1e-5


def test_linear_matmul_gradients(randn):
    a, b = randn(2, 3, 4), randn(2, 4, 2)
    w, bias = randn(5, 4), randn(5)
    v = randn(4)
    r = randn(2, 3, 2)

    def run():
        m = F.sum_all(F.mul(F.matmul(a, b), r))
        return F.add(m, F.sum_all(F.sigmoid(F.linear(v, w, bias))))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    for t in (a, b, w, bias, v):
        analytic = t.grad.copy()
        numeric = finite_diff_grad(lambda val, t=t: _swap(t, val, run), t)
        assert max_relative_error(analytic, numeric.data) < 1e-5


def test_broadcast_gradients_reduce(randn):
    x, s = randn(3, 4, 4), randn(3, 1, 1)

    def run():
        return F.sum_all(F.mul(F.add(x, s), F.mul(x, s)))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    assert s.grad.shape == (3, 1, 1)
    numeric = finite_diff_grad(lambda v: _swap(s, v, run), s)
    assert max_relative_error(s.grad, numeric.data) < 1e-5


def test_group_norm_gradients(randn):
    x, gamma, beta = randn(4, 3, 3), randn(4), randn(4)
    r = randn(4, 3, 3)

    def run():
        return F.sum_all(F.mul(F.group_norm(x, gamma, beta, groups=2), r))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    for t in (x, gamma, beta):
        analytic = t.grad.copy()
        numeric = finite_diff_grad(lambda v, t=t: _swap(t, v, run), t)
        assert max_relative_error(analytic, numeric.data) < 1e-5


def test_concat_gradients(randn):
    a, b = randn(2, 3, 3), randn(1, 3, 3)
    r = randn(3, 3, 3)
    with Graph() as graph:
        loss = F.sum_all(F.mul(F.concat([a, b]), r))
    graph.backward(loss)
    np.testing.assert_allclose(a.grad, r.data[:2])
    np.testing.assert_allclose(b.grad, r.data[2:])


def test_bce_gradient_is_prob_minus_target():
    z = Tensor(np.array([0.3]), dtype="float64")
    with Graph() as graph:
        loss = F.bce_with_logits(z, 1.0)
    graph.backward(loss)
    np.testing.assert_allclose(z.grad, [1.0 / (1.0 + np.exp(-0.3)) - 1.0])


# --- seeded gradient sweeps: analytic vs central differences for every input ---

GRADIENT_SEEDS = range(20)


def _normal(rng, *shape):
    return Tensor(rng.standard_normal(shape), dtype="float64")


def _away_from_zero(rng, *shape):
    """Entries with |v| >= 0.1 so a 1e-5 nudge never crosses the relu kink."""
    v = rng.standard_normal(shape)
    return Tensor(np.sign(v) * (np.abs(v) + 0.1), dtype="float64")


def _distinct(rng, *shape):
    """Entries spaced at least 0.1 apart so a 1e-5 nudge never changes a max."""
    size = int(np.prod(shape))
    return Tensor(rng.permutation(size).reshape(shape) * 0.1 - size * 0.05, dtype="float64")


def _case_conv2d(rng):
    k = int(rng.integers(1, 4))
    x = _normal(rng, int(rng.integers(1, 3)), int(rng.integers(k, 7)), int(rng.integers(k, 7)))
    w, b = _normal(rng, 2, x.shape[0], k, k), _normal(rng, 2)
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    return lambda: F.conv2d(x, w, b, stride=stride, padding=padding), [x, w, b]


def _case_depthwise(rng):
    k = int(rng.integers(1, 4))
    x = _normal(rng, int(rng.integers(1, 4)), int(rng.integers(k, 7)), int(rng.integers(k, 7)))
    w, b = _normal(rng, x.shape[0], 1, k, k), _normal(rng, x.shape[0])
    stride, padding = int(rng.integers(1, 3)), k // 2
    return lambda: F.depthwise_conv2d(x, w, b, stride=stride, padding=padding), [x, w, b]


def _case_pointwise(rng):
    x = _normal(rng, int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
    c_out = int(rng.integers(1, 4))
    w, b = _normal(rng, c_out, x.shape[0]), _normal(rng, c_out)
    return lambda: F.pointwise_conv2d(x, w, b), [x, w, b]


def _case_maxpool(rng):
    k = int(rng.integers(1, 4))
    x = _distinct(rng, int(rng.integers(1, 3)), int(rng.integers(k, 8)), int(rng.integers(k, 8)))
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, k // 2 + 1))
    return lambda: F.maxpool2d(x, kernel=k, stride=stride, padding=padding), [x]


def _case_group_norm(rng):
    groups = int(rng.integers(1, 3))
    x = _normal(rng, groups * int(rng.integers(1, 3)), int(rng.integers(2, 4)), 3)
    gamma, beta = _normal(rng, x.shape[0]), _normal(rng, x.shape[0])
    return lambda: F.group_norm(x, gamma, beta, groups=groups), [x, gamma, beta]


def _case_matmul(rng):
    n, m, p = (int(v) for v in rng.integers(1, 4, size=3))
    a, b = _normal(rng, 2, n, m), _normal(rng, 2, m, p)
    return lambda: F.matmul(a, b), [a, b]


def _case_linear(rng):
    # a vector or a small batch of rows
    rows = int(rng.integers(0, 4))
    x = _normal(rng, rows, 4) if rows else _normal(rng, 4)
    w, b = _normal(rng, 3, 4), _normal(rng, 3)
    return lambda: F.linear(x, w, b), [x, w, b]


def _case_add_mul(rng):
    x, s = _normal(rng, 3, 2, 4), _normal(rng, 3, 1, 1)
    return lambda: F.mul(F.add(x, s), F.scale(x, 0.5)), [x, s]


def _case_relu(rng):
    x = _away_from_zero(rng, 3, 4)
    return lambda: F.relu(x), [x]


def _case_sigmoid(rng):
    x = _normal(rng, 2, 5)
    return lambda: F.sigmoid(x), [x]


def _case_softmax(rng):
    x = _normal(rng, 2, int(rng.integers(1, 6)))
    return lambda: F.softmax(x), [x]


def _case_gap(rng):
    x = _normal(rng, 3, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
    return lambda: F.global_avg_pool(x), [x]


def _case_layout(rng):
    a, b = _normal(rng, 2, 3, 4), _normal(rng, 1, 3, 4)

    def build():
        flat = F.reshape(F.concat([a, b]), (3, 12))
        return F.slice_axis(F.transpose(flat, (1, 0)), 0, 2, 9)

    return build, [a, b]


def _case_bce(rng):
    z = _normal(rng, 1)
    target = float(rng.integers(2))
    return lambda: F.bce_with_logits(z, target), [z]


GRADIENT_CASES = {
    "conv2d": _case_conv2d,
    "depthwise-conv2d": _case_depthwise,
    "pointwise-conv2d": _case_pointwise,
    "maxpool2d": _case_maxpool,
    "group-norm": _case_group_norm,
    "matmul": _case_matmul,
    "linear": _case_linear,
    "add-mul-scale": _case_add_mul,
    "relu": _case_relu,
    "sigmoid": _case_sigmoid,
    "softmax": _case_softmax,
    "global-avg-pool": _case_gap,
    "concat-reshape-transpose-slice": _case_layout,
    "bce-with-logits": _case_bce,
}


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
@pytest.mark.parametrize("kind", list(GRADIENT_CASES))
def test_gradient_sweep(kind, seed):
    rng = np.random.default_rng(seed)
    build, inputs = GRADIENT_CASES[kind](rng)
    r = Tensor(rng.standard_normal(build().shape), dtype="float64")

    def run():
        return F.sum_all(F.mul(build(), r))

    with Graph() as graph:
        loss = run()
    graph.backward(loss)
    for t in inputs:
        analytic = t.grad.copy()
        numeric = finite_diff_grad(lambda v, t=t: _swap(t, v, run), t)
        assert max_relative_error(analytic, numeric.data) < 1e-4, (kind, seed, t.shape)
