"""Vectorized forward-mode dual numbers.

A :class:`Dual` carries a value array of shape ``S`` and a tangent array of
shape ``S + (m,)`` holding ``m`` directional derivatives at once. Enough of
the numpy protocol is implemented (ufuncs, ``np.stack``, ``np.where``,
``np.moveaxis``, ...) for the right-hand sides in this package to run
unchanged on dual inputs.
"""

from __future__ import annotations

import numpy as np

_HANDLED_FUNCTIONS = {}


def _implements(func):
    def decorator(impl):
        _HANDLED_FUNCTIONS[func] = impl
        return impl

    return decorator


def _split(x):
    if isinstance(x, Dual):
        return x.value, x.grad
    return np.asarray(x), None


def _expand(g, ndim):
    # broadcast a plain coefficient against a tangent array
    return np.asarray(g)[..., None] if np.ndim(g) else g


class Dual:
    __array_priority__ = 100

    def __init__(self, value, grad) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape[:-1] != self.value.shape:
            grad = np.broadcast_to(grad, self.value.shape + grad.shape[-1:]).copy()
        self.grad = grad

    @classmethod
    def seed(cls, value, columns=None) -> "Dual":
        """Dual variable whose tangent directions are unit vectors.

        ``columns`` selects which flattened entries are seeded; the tangent
        dimension equals ``len(columns)``.
        """
        value = np.asarray(value, dtype=np.float64)
        n = value.size
        if columns is None:
            columns = np.arange(n)
        columns = np.asarray(columns)
        grad = np.zeros((n, columns.size))
        grad[columns, np.arange(columns.size)] = 1.0
        return cls(value, grad.reshape(value.shape + (columns.size,)))

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def n_tangents(self):
        return self.grad.shape[-1]

    def __len__(self):
        return len(self.value)

    def __repr__(self) -> str:
        return f"Dual(value={self.value!r}, n_tangents={self.n_tangents})"

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        value = self.value.reshape(shape)
        return Dual(value, self.grad.reshape(value.shape + (self.n_tangents,)))

    def copy(self):
        return Dual(self.value.copy(), self.grad.copy())

    # {{{ indexing

    @staticmethod
    def _grad_key(key):
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            return key + (slice(None),)
        return key

    def __getitem__(self, key):
        return Dual(self.value[key], self.grad[self._grad_key(key)])

    def __setitem__(self, key, other) -> None:
        value, grad = _split(other)
        self.value[key] = value
        self.grad[self._grad_key(key)] = 0.0 if grad is None else grad

    # }}}

    # {{{ arithmetic

    def __neg__(self):
        return Dual(-self.value, -self.grad)

    def __pos__(self):
        return self

    def __add__(self, other):
        ov, og = _split(other)
        grad = self.grad if og is None else self.grad + og
        return Dual(self.value + ov, grad)

    __radd__ = __add__

    def __sub__(self, other):
        ov, og = _split(other)
        grad = self.grad if og is None else self.grad - og
        return Dual(self.value - ov, grad)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        ov, og = _split(other)
        grad = self.grad * _expand(ov, self.ndim)
        if og is not None:
            grad = grad + og * self.value[..., None]
        return Dual(self.value * ov, grad)

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, og = _split(other)
        value = self.value / ov
        grad = self.grad / _expand(ov, self.ndim)
        if og is not None:
            grad = grad - og * (value / ov)[..., None]
        return Dual(value, grad)

    def __rtruediv__(self, other):
        ov, _ = _split(other)
        value = ov / self.value
        return Dual(value, -self.grad * (value / self.value)[..., None])

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            raise TypeError("dual exponents are not supported")
        value = self.value ** exponent
        dvalue = exponent * self.value ** (exponent - 1)
        return Dual(value, self.grad * dvalue[..., None])

    def __abs__(self):
        return np.absolute(self)

    # comparisons act on the primal value
    def __lt__(self, other):
        return self.value < _split(other)[0]

    def __le__(self, other):
        return self.value <= _split(other)[0]

    def __gt__(self, other):
        return self.value > _split(other)[0]

    def __ge__(self, other):
        return self.value >= _split(other)[0]

    # }}}

    # {{{ numpy protocols

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        if ufunc is np.add:
            return inputs[0] + inputs[1] if isinstance(inputs[0], Dual) else inputs[1] + inputs[0]
        if ufunc is np.subtract:
            a, b = inputs
            return a - b if isinstance(a, Dual) else (-b) + a
        if ufunc is np.multiply:
            a, b = inputs
            return a * b if isinstance(a, Dual) else b * a
        if ufunc is np.true_divide:
            a, b = inputs
            return a / b if isinstance(a, Dual) else b.__rtruediv__(a)
        if ufunc is np.negative:
            return -inputs[0]
        if ufunc is np.power:
            return inputs[0] ** inputs[1]

        (x,) = inputs
        v = x.value
        if ufunc is np.sqrt:
            r = np.sqrt(v)
            return Dual(r, x.grad * (0.5 / r)[..., None])
        if ufunc is np.square:
            return Dual(v * v, x.grad * (2 * v)[..., None])
        if ufunc is np.absolute:
            return Dual(np.abs(v), x.grad * np.sign(v)[..., None])
        if ufunc is np.exp:
            r = np.exp(v)
            return Dual(r, x.grad * r[..., None])
        if ufunc is np.log:
            return Dual(np.log(v), x.grad / v[..., None])
        if ufunc is np.sin:
            return Dual(np.sin(v), x.grad * np.cos(v)[..., None])
        if ufunc is np.cos:
            return Dual(np.cos(v), -x.grad * np.sin(v)[..., None])
        if ufunc is np.tanh:
            r = np.tanh(v)
            return Dual(r, x.grad * (1 - r * r)[..., None])
        if ufunc in (np.isnan, np.isfinite, np.isinf, np.sign):
            return ufunc(v)
        return NotImplemented

    def __array_function__(self, func, types, args, kwargs):
        impl = _HANDLED_FUNCTIONS.get(func)
        if impl is None:
            return NotImplemented
        return impl(*args, **kwargs)

    # }}}


def _as_dual(x, like: Dual) -> Dual:
    if isinstance(x, Dual):
        return x
    value = np.asarray(x, dtype=np.float64)
    return Dual(value, np.zeros(value.shape + (like.n_tangents,)))


def _first_dual(items) -> Dual:
    return next(x for x in items if isinstance(x, Dual))


@_implements(np.stack)
def _stack(arrays, axis=0):
    arrays = list(arrays)
    like = _first_dual(arrays)
    duals = [_as_dual(a, like) for a in arrays]
    ndim = duals[0].ndim + 1
    axis = axis % ndim
    return Dual(np.stack([d.value for d in duals], axis),
                np.stack([d.grad for d in duals], axis))


@_implements(np.concatenate)
def _concatenate(arrays, axis=0):
    arrays = list(arrays)
    like = _first_dual(arrays)
    duals = [_as_dual(a, like) for a in arrays]
    axis = axis % duals[0].ndim
    return Dual(np.concatenate([d.value for d in duals], axis),
                np.concatenate([d.grad for d in duals], axis))


@_implements(np.where)
def _where(cond, a, b):
    like = _first_dual([a, b])
    a, b = _as_dual(a, like), _as_dual(b, like)
    cond = np.asarray(cond)
    value = np.where(cond, a.value, b.value)
    grad = np.where(cond[..., None], a.grad, b.grad)
    return Dual(value, grad)


@_implements(np.moveaxis)
def _moveaxis(a, source, destination):
    nd = a.ndim
    src = np.atleast_1d(source) % nd
    dst = np.atleast_1d(destination) % nd
    return Dual(np.moveaxis(a.value, source, destination),
                np.moveaxis(a.grad, tuple(src), tuple(dst)))


@_implements(np.zeros_like)
def _zeros_like(a, dtype=None):
    return Dual(np.zeros_like(a.value), np.zeros_like(a.grad))


@_implements(np.roll)
def _roll(a, shift, axis=None):
    if axis is None:
        raise TypeError("np.roll on Dual requires an explicit axis")
    axis = axis % a.ndim
    return Dual(np.roll(a.value, shift, axis), np.roll(a.grad, shift, axis))


@_implements(np.take)
def _take(a, indices, axis=None):
    if axis is None:
        raise TypeError("np.take on Dual requires an explicit axis")
    axis = axis % a.ndim
    return Dual(np.take(a.value, indices, axis), np.take(a.grad, indices, axis))


@_implements(np.any)
def _any(a, *args, **kwargs):
    return np.any(a.value, *args, **kwargs)


def value_of(x):
    """Primal value of ``x`` (identity for plain arrays)."""
    return x.value if isinstance(x, Dual) else x
