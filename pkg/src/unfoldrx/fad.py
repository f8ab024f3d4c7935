"""Forward-mode automatic differentiation on numpy arrays.

A :class:`Dual` carries a value array and a tangent array with one extra
leading axis of size P (the number of trainable scalars).  The receiver code
calls the dispatch helpers in this module (``mul`` is just ``*`` via operator
overloading; ``matmul``, ``where``, ``min_last`` etc. live here) so the same
code path runs on plain ndarrays when no gradient is requested.

Non-smooth primitives (clip, min, where) propagate the derivative of the
active branch, the standard subgradient choice for piecewise-smooth code.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual", "val", "is_dual", "seed_params", "exp", "log", "log1p", "sqrt",
    "tanh", "sigmoid", "absolute", "abs2", "conj", "real", "imag", "sign",
    "where", "clip", "matmul", "inv", "solve", "summ", "mean", "min_last",
    "take_last", "stack_last", "transpose", "reshape", "reciprocal",
    "maximum_const",
]


def val(x):
    """Value part of ``x`` (identity for plain arrays/scalars)."""
    return x.val if isinstance(x, Dual) else x


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def _align(tan: np.ndarray, value_shape: tuple, out_shape: tuple) -> np.ndarray:
    """Reshape a (P,)+value_shape tangent so it broadcasts against out_shape."""
    pad = len(out_shape) - len(value_shape)
    if pad == 0:
        return tan
    return tan.reshape(tan.shape[:1] + (1,) * pad + tuple(value_shape))


def _tan_of(x, out_shape: tuple, p: int) -> np.ndarray:
    if isinstance(x, Dual):
        return _align(x.tan, np.shape(x.val), out_shape)
    return np.zeros((1,) + (1,) * len(out_shape))


class Dual:
    __array_priority__ = 100  # win against ndarray in mixed expressions

    def __init__(self, value, tangent):
        self.val = np.asarray(value)
        tangent = np.asarray(tangent)
        full = tangent.shape[:1] + self.val.shape
        if tangent.shape != full:
            tangent = np.broadcast_to(tangent, full)  # view; ops never mutate
        self.tan = tangent

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def p(self):
        return self.tan.shape[0]

    def __repr__(self):
        return f"Dual(val={self.val!r}, P={self.p})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        ov = val(other)
        out = self.val + ov
        tan = _align(self.tan, self.val.shape, out.shape)
        if isinstance(other, Dual):
            tan = tan + _align(other.tan, other.val.shape, out.shape)
        return Dual(out, tan)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __sub__(self, other):
        return self.__add__(-other if isinstance(other, Dual) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, Dual):
            out = self.val * other.val
            tan = (_align(self.tan, self.val.shape, out.shape) * other.val
                   + self.val * _align(other.tan, other.val.shape, out.shape))
        else:
            ov = np.asarray(other)
            out = self.val * ov
            tan = _align(self.tan, self.val.shape, out.shape) * ov
        return Dual(out, tan)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other._recip()
        ov = np.asarray(other)
        out = self.val / ov
        return Dual(out, _align(self.tan, self.val.shape, out.shape) / ov)

    def __rtruediv__(self, other):
        return np.asarray(other) * self._recip()

    def _recip(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.tan * (inv * inv))

    def __pow__(self, n):
        if n != int(n):
            raise NotImplementedError("only integer powers")
        out = self.val ** n
        return Dual(out, n * (self.val ** (n - 1)) * self.tan)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.tan[(slice(None),) + idx])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        new_val = self.val.reshape(shape)
        return Dual(new_val, np.reshape(self.tan, (self.p,) + new_val.shape))

    def copy(self):
        return Dual(self.val.copy(), self.tan.copy())


def seed_params(values: np.ndarray) -> Dual:
    """Parameter vector with identity tangent (one direction per scalar)."""
    values = np.asarray(values, dtype=float)
    return Dual(values, np.eye(values.shape[0]))


# ---------------------------------------------------------------------------
# elementwise functions

def _unary(x, f, df):
    if isinstance(x, Dual):
        v = f(x.val)
        return Dual(v, df(x.val, v) * x.tan)
    return f(x)


def exp(x):
    return _unary(x, np.exp, lambda v, o: o)


def log(x):
    return _unary(x, np.log, lambda v, o: 1.0 / v)


def log1p(x):
    return _unary(x, np.log1p, lambda v, o: 1.0 / (1.0 + v))


def sqrt(x):
    return _unary(x, np.sqrt, lambda v, o: 0.5 / o)


def tanh(x):
    return _unary(x, np.tanh, lambda v, o: 1.0 - o * o)


def sigmoid(x):
    def f(v):
        out = np.empty_like(v, dtype=float)
        pos = v >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
        ev = np.exp(v[~pos])
        out[~pos] = ev / (1.0 + ev)
        return out
    return _unary(x, f, lambda v, o: o * (1.0 - o))


def absolute(x):
    """|x| for real x; derivative sign(x) (0 at the tie)."""
    return _unary(x, np.abs, lambda v, o: np.sign(v))


def abs2(z):
    """|z|^2 with a real tangent for complex dual inputs."""
    if isinstance(z, Dual):
        v = (z.val.real**2 + z.val.imag**2)
        tan = 2.0 * (np.conj(z.val) * z.tan).real
        return Dual(v, tan)
    return z.real**2 + z.imag**2


def conj(z):
    if isinstance(z, Dual):
        return Dual(np.conj(z.val), np.conj(z.tan))
    return np.conj(z)


def real(z):
    if isinstance(z, Dual):
        return Dual(z.val.real, z.tan.real)
    return np.real(z)


def imag(z):
    if isinstance(z, Dual):
        return Dual(z.val.imag, z.tan.imag)
    return np.imag(z)


def sign(x):
    return np.sign(val(x))


def reciprocal(x):
    if isinstance(x, Dual):
        return x._recip()
    return 1.0 / x


def where(cond, a, b):
    cond = np.asarray(val(cond))
    if not (isinstance(a, Dual) or isinstance(b, Dual)):
        return np.where(cond, a, b)
    out = np.where(cond, val(a), val(b))
    ta = _tan_of(a, out.shape, 0)
    tb = _tan_of(b, out.shape, 0)
    tan = np.where(cond, ta, tb)
    return Dual(out, tan)


def clip(x, lo, hi):
    """Clip with pass-through derivative strictly inside [lo, hi]."""
    if isinstance(x, Dual):
        out = np.clip(x.val, lo, hi)
        inside = (x.val > lo) & (x.val < hi)
        return Dual(out, np.where(inside, x.tan, 0.0))
    return np.clip(x, lo, hi)


def maximum_const(x, c):
    """max(x, c) for constant c (used as a variance floor)."""
    if isinstance(x, Dual):
        keep = x.val > c
        return Dual(np.maximum(x.val, c), np.where(keep, x.tan, 0.0))
    return np.maximum(x, c)


# ---------------------------------------------------------------------------
# linear algebra / reductions

def matmul(a, b):
    if not (isinstance(a, Dual) or isinstance(b, Dual)):
        return a @ b
    av, bv = val(a), val(b)
    out = av @ bv
    terms = []
    if isinstance(a, Dual):
        terms.append(_align(a.tan, av.shape, out.shape) @ bv)
    if isinstance(b, Dual):
        terms.append(av @ _align(b.tan, bv.shape, out.shape))
    tan = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    return Dual(out, tan)


def inv(a):
    if isinstance(a, Dual):
        x = np.linalg.inv(a.val)
        tan = -x @ _align(a.tan, a.val.shape, x.shape) @ x
        return Dual(x, tan)
    return np.linalg.inv(a)


def solve(a, b):
    if not (isinstance(a, Dual) or isinstance(b, Dual)):
        return np.linalg.solve(a, b)
    av, bv = val(a), val(b)
    x = np.linalg.solve(av, bv)
    rhs = None
    if isinstance(b, Dual):
        rhs = _align(b.tan, bv.shape, x.shape)
    if isinstance(a, Dual):
        term = -_align(a.tan, av.shape, x.shape) @ x
        rhs = term if rhs is None else rhs + term
    return Dual(x, np.linalg.solve(av, rhs))


def summ(x, axis=None):
    if isinstance(x, Dual):
        out = np.sum(x.val, axis=axis)
        if axis is None:
            tan = x.tan.reshape(x.p, -1).sum(axis=1)
        else:
            axes = (axis,) if np.isscalar(axis) else tuple(axis)
            axes = tuple(a % x.val.ndim + 1 for a in axes)
            tan = np.sum(x.tan, axis=axes)
        return Dual(out, tan)
    return np.sum(x, axis=axis)


def mean(x, axis=None):
    n = np.asarray(val(x)).size if axis is None else np.asarray(val(x)).shape[axis]
    return summ(x, axis=axis) * (1.0 / n)


def min_last(x):
    """Minimum over the last axis, derivative of the active branch."""
    if isinstance(x, Dual):
        idx = np.argmin(x.val, axis=-1)
        out = np.take_along_axis(x.val, idx[..., None], axis=-1)[..., 0]
        tan = np.take_along_axis(
            x.tan, np.broadcast_to(idx, x.tan.shape[:-1])[..., None], axis=-1)[..., 0]
        return Dual(out, tan)
    return np.min(x, axis=-1)


def take_last(x, idx):
    """Fancy-index the last axis with an integer array ``idx``."""
    if isinstance(x, Dual):
        return Dual(x.val[..., idx], x.tan[..., idx])
    return x[..., idx]


def transpose(x, axes):
    if isinstance(x, Dual):
        return Dual(np.transpose(x.val, axes),
                    np.transpose(x.tan, (0,) + tuple(a + 1 for a in axes)))
    return np.transpose(x, axes)


def reshape(x, shape):
    if isinstance(x, Dual):
        return x.reshape(shape)
    return np.reshape(x, shape)


def stack_last(items):
    """Stack a list of broadcast-compatible values along a new last axis."""
    if not any(isinstance(c, Dual) for c in items):
        return np.stack([np.broadcast_to(
            c, np.broadcast_shapes(*[np.shape(i) for i in items]))
            for c in items], axis=-1)
    shape = np.broadcast_shapes(*[np.shape(val(c)) for c in items])
    p = max(c.p for c in items if isinstance(c, Dual))
    vals = np.stack([np.broadcast_to(val(c), shape) for c in items], axis=-1)
    tans = []
    for c in items:
        if isinstance(c, Dual):
            t = _align(c.tan, np.shape(c.val), shape)
        else:
            t = np.zeros((1,) + (1,) * len(shape))
        tans.append(np.broadcast_to(t, (p,) + shape))
    return Dual(vals, np.stack(tans, axis=-1))
