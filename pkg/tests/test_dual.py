import numpy as np
import pytest

from upwindsbp.dual import Dual, value_of


def test_seed_and_arithmetic():
    x = Dual.seed(np.array([1.0, 2.0]))
    y = 3 * x * x + 2 / x - x ** 3
    expected = 6 * x.value - 2 / x.value ** 2 - 3 * x.value ** 2
    np.testing.assert_allclose(np.diagonal(y.grad), expected)
    np.testing.assert_allclose(y.grad - np.diag(np.diagonal(y.grad)), 0.0)


@pytest.mark.parametrize("fn,deriv", [
    (np.sqrt, lambda v: 0.5 / np.sqrt(v)),
    (np.exp, np.exp),
    (np.log, lambda v: 1 / v),
    (np.sin, np.cos),
    (np.cos, lambda v: -np.sin(v)),
    (np.tanh, lambda v: 1 - np.tanh(v) ** 2),
    (np.abs, np.sign),
    (np.square, lambda v: 2 * v),
])
def test_ufuncs(fn, deriv):
    v = np.array([0.3, 1.7, 2.2])
    out = fn(Dual.seed(v))
    np.testing.assert_allclose(out.value, fn(v))
    np.testing.assert_allclose(np.diagonal(out.grad), deriv(v), rtol=1e-14)


def test_array_functions():
    x = Dual.seed(np.arange(6.0).reshape(2, 3) + 1)
    s = np.stack([x[..., 0], 2 * x[..., 1]], axis=-1)
    assert s.shape == (2, 2)
    assert s.grad[0, 1, 1] == 2.0
    r = np.roll(x, 1, axis=1)
    assert r.value[0, 0] == 3.0 and r.grad[0, 0, 2] == 1.0
    w = np.where(x.value > 3, x, 0.0)
    assert w.grad[0, 0].sum() == 0 and w.grad[1, 0, 3] == 1.0
    m = np.moveaxis(x, 0, 1)
    assert m.shape == (3, 2) and m.grad[2, 1, 5] == 1.0
    c = np.concatenate([x, x], axis=0)
    assert c.shape == (4, 3)


def test_setitem_and_matmul_like_ops():
    x = Dual.seed(np.array([1.0, 2.0, 3.0]))
    y = np.zeros_like(x)
    y[1] = x[0] * x[2]
    assert y.grad[1].tolist() == [3.0, 0.0, 1.0]
    assert value_of(y)[1] == 3.0
    assert value_of(np.array([1.0]))[0] == 1.0


def test_matches_finite_differences():
    rng = np.random.default_rng(0)
    v = rng.uniform(0.5, 1.5, 4)

    def f(z):
        return np.sqrt(z * z + 1.0) / (z + 2.0) - np.exp(-z) * np.sin(z)

    J = np.diagonal(f(Dual.seed(v)).grad)
    h = 1e-6
    fd = (f(v + h) - f(v - h)) / (2 * h)
    np.testing.assert_allclose(J, fd, rtol=1e-8)
