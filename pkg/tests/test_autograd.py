import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdiff.autograd import Tensor, UnsupportedOperation, as_tensor, concat, grad


def numeric_grad(f, params, h=1e-6):
    out = {}
    for k, v in params.items():
        g = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            old = v[idx]
            v[idx] = old + h
            up = f(params)
            v[idx] = old - h
            down = f(params)
            v[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[k] = g
    return out


def check_gradient(loss_fn, params, tol=1e-6):
    value, g = grad(params, loss_fn)
    num = numeric_grad(lambda p: float(loss_fn({k: as_tensor(v) for k, v in p.items()}).data), params)
    for k in params:
        scale = max(np.abs(num[k]).max(), np.abs(g[k]).max(), 1e-8)
        assert np.abs(g[k] - num[k]).max() / scale < tol, k
    return value


UNARY = {
    "tanh": lambda x: x.tanh(),
    "sigmoid": lambda x: x.sigmoid(),
    "silu": lambda x: x.silu(),
    "exp": lambda x: (x * 0.3).exp(),
    "neg": lambda x: -x,
    "pow": lambda x: x ** 3,
    "clamp": lambda x: x.clamp_min(0.1),
    "log_softmax": lambda x: x.log_softmax(-1),
    "mean": lambda x: x.mean(axis=0, keepdims=True),
    "reshape": lambda x: x.reshape(-1),
    "div": lambda x: x / 3.0,
    "rsub": lambda x: 2.0 - x,
}


@pytest.mark.parametrize("name", sorted(UNARY))
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(1, 4), cols=st.integers(1, 4))
def test_unary_ops_match_finite_differences(name, seed, rows, cols):
    rng = np.random.default_rng(seed)
    params = {"x": rng.normal(size=(rows, cols))}
    weights = rng.normal(size=UNARY[name](as_tensor(params["x"])).shape)
    check_gradient(lambda P: (UNARY[name](P["x"]) * weights).sum(), params)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), b=st.integers(1, 3), n=st.integers(1, 4), k=st.integers(1, 4), m=st.integers(1, 4))
def test_broadcast_matmul_and_binary_ops(seed, b, n, k, m):
    rng = np.random.default_rng(seed)
    params = {"a": rng.normal(size=(b, n, k)), "w": rng.normal(size=(k, m)), "c": rng.normal(size=(m,)),
              "d": rng.normal(size=(b, 1, m))}
    check_gradient(lambda P: ((P["a"] @ P["w"] + P["c"]) * P["d"] - P["c"]).sum(), params)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_batched_matmul_both_sides(seed):
    rng = np.random.default_rng(seed)
    params = {"w": rng.normal(size=(2, 3, 1, 4)), "p": rng.normal(size=(2, 3, 4, 5))}
    check_gradient(lambda P: ((P["w"] @ P["p"]) ** 2).sum(), params)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_expand_and_concat(seed):
    rng = np.random.default_rng(seed)
    params = {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(2, 3, 2))}

    def loss(P):
        pair = P["a"].expand(2) + P["a"].expand(1)
        return (pair.tanh().sum() + concat([P["a"], P["b"]], axis=-1).sigmoid().sum())

    check_gradient(loss, params)


def test_reflected_operators_with_arrays():
    x = {"x": np.array([[1.0, 2.0], [3.0, 4.0]])}
    m = np.array([[0.5, -1.0]])
    value, g = grad(x, lambda P: (m @ P["x"]).sum() + (m * P["x"]).sum() + (1.0 - P["x"]).sum())
    assert np.allclose(g["x"], m.T @ np.ones((1, 2)) + m - 1.0)


def test_sum_of_squares():
    params = {"a": np.array([1.0, -2.0, 3.0]), "b": np.array([[0.5]])}
    _, g = grad(params, lambda P: (P["a"] * P["a"]).sum() + (P["b"] ** 2).sum())
    assert np.allclose(g["a"], 2 * params["a"]) and np.allclose(g["b"], 2 * params["b"])


def test_constant_loss_gives_zero_gradient():
    params = {"a": np.ones(3)}
    value, g = grad(params, lambda P: as_tensor(np.array(4.0)))
    assert value == 4.0 and np.array_equal(g["a"], np.zeros(3))


def test_non_scalar_loss_rejected():
    with pytest.raises(ValueError):
        grad({"a": np.ones(3)}, lambda P: P["a"] * 2.0)


def test_unsupported_operation():
    a = as_tensor(np.ones(2))
    b = Tensor(np.ones(2), requires_grad=True)
    for op in (lambda: a / b, lambda: 1.0 / b, lambda: np.ones(2) / b, lambda: a ** b):
        with pytest.raises(UnsupportedOperation):
            op()


def test_shared_subexpression_accumulates():
    params = {"x": np.array([2.0])}
    _, g = grad(params, lambda P: (P["x"] * P["x"] * P["x"]).sum())
    assert g["x"][0] == pytest.approx(12.0)
