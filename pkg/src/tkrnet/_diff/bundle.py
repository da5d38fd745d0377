"""Forward-mode tangent bundles over numpy arrays or recorded variables.

A :class:`TangentBundle` pairs a primal value of shape ``S`` with ``n``
directional derivatives stacked along a *leading* axis, ``(n, *S)``.  Keeping
the direction axis first lets numpy broadcasting between a bundle's tangents and
plain operands line up from the right without any bookkeeping.

Both components may be plain ``ndarray`` or :class:`~tkrnet._diff.tape.Var`.
When they are ``Var`` every tangent operation is itself recorded, which is how
reverse-over-forward (parameter gradients of input derivatives) stays exact.

Tangents are allowed to hold size-1 axes where the value does not; structural
operations (sums, indexing, reshapes) broadcast them out first.
"""

from __future__ import annotations

import numbers
from collections.abc import Sequence
from typing import Any, TypeAlias

import numpy as np

from tkrnet._diff import tape
from tkrnet._diff.tape import Var

__all__ = ["TangentBundle"]

Inner: TypeAlias = "np.ndarray | Var"


def _unary(name: str, x: Inner) -> Inner:
    if isinstance(x, Var):
        return getattr(x, name)()  # type: ignore[no-any-return]
    with np.errstate(all="ignore"):
        return getattr(np, name)(x)  # type: ignore[no-any-return]


def _where(cond: np.ndarray, a: Any, b: Any) -> Inner:
    if isinstance(a, Var) or isinstance(b, Var):
        return tape.where(cond, a, b)
    return np.where(cond, a, b)


def _concat(parts: Sequence[Inner], axis: int) -> Inner:
    if any(isinstance(p, Var) for p in parts):
        return tape.concat(parts, axis=axis)
    return np.concatenate(parts, axis=axis)  # type: ignore[arg-type]


def _take(x: Inner, idx: np.ndarray) -> Inner:
    if isinstance(x, Var):
        return tape.take(x, idx)
    return np.take(x, idx, axis=-1)


def _gather(x: Inner, idx: np.ndarray) -> Inner:
    if isinstance(x, Var):
        return tape.gather(x, idx)
    idx = np.broadcast_to(idx, x.shape[:-1] + idx.shape[-1:])
    return np.take_along_axis(x, idx, axis=-1)


def _full(tan: Inner, shape: tuple[int, ...]) -> Inner:
    if tuple(tan.shape) == shape:
        return tan
    if isinstance(tan, Var):
        return tan + np.zeros(shape)
    return np.broadcast_to(tan, shape)


def _align(tan: Inner, ndim: int) -> Inner:
    """Insert size-1 axes after the direction axis so ``tan`` has ``ndim+1`` dims."""
    missing = ndim + 1 - tan.ndim
    if missing <= 0:
        return tan
    new = (tan.shape[0],) + (1,) * missing + tuple(tan.shape[1:])
    return tan.reshape(new)


def _lift(other: Any) -> TangentBundle | Inner | None:
    if isinstance(other, TangentBundle | Var):
        return other
    if isinstance(other, np.ndarray | numbers.Real):
        return np.asarray(other, dtype=np.float64)
    return None


class TangentBundle:
    """A value together with its directional derivatives along ``n`` directions."""

    __array_ufunc__ = None
    __slots__ = ("tangents", "value")

    def __init__(self, value: Any, tangents: Any) -> None:
        if not isinstance(value, Var):
            value = np.asarray(value, dtype=np.float64)
        if not isinstance(tangents, Var):
            tangents = np.asarray(tangents, dtype=np.float64)
        if tangents.ndim != value.ndim + 1:
            raise ValueError(
                f"tangents must have shape (n, *{tuple(value.shape)}), "
                f"got {tuple(tangents.shape)}"
            )
        self.value = value
        self.tangents = tangents

    def __repr__(self) -> str:
        return f"TangentBundle(shape={self.shape}, directions={self.n_directions})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def ndim(self) -> int:
        return int(self.value.ndim)

    @property
    def n_directions(self) -> int:
        return int(self.tangents.shape[0])

    def _full_tangents(self) -> Inner:
        return _full(self.tangents, (self.n_directions, *self.shape))

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        if isinstance(o, TangentBundle):
            value = self.value + o.value
            nd = value.ndim
            return TangentBundle(
                value, _align(self.tangents, nd) + _align(o.tangents, nd)
            )
        value = self.value + o
        return TangentBundle(value, _align(self.tangents, value.ndim))

    __radd__ = __add__

    def __neg__(self) -> TangentBundle:
        return TangentBundle(-self.value, -self.tangents)

    def __sub__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        return (-self) + o

    def __mul__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        if isinstance(o, TangentBundle):
            value = self.value * o.value
            nd = value.ndim
            tan = _align(self.tangents, nd) * o.value + self.value * _align(
                o.tangents, nd
            )
            return TangentBundle(value, tan)
        value = self.value * o
        return TangentBundle(value, _align(self.tangents, value.ndim) * o)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        if isinstance(o, TangentBundle):
            value = self.value / o.value
            nd = value.ndim
            tan = (_align(self.tangents, nd) - value * _align(o.tangents, nd)) / o.value
            return TangentBundle(value, tan)
        value = self.value / o
        return TangentBundle(value, _align(self.tangents, value.ndim) / o)

    def __rtruediv__(self, other: Any) -> TangentBundle:
        o = _lift(other)
        if o is None:
            return NotImplemented
        value = o / self.value
        tan = -(value / self.value) * _align(self.tangents, value.ndim)
        return TangentBundle(value, tan)

    def __pow__(self, power: float) -> TangentBundle:
        if not isinstance(power, numbers.Real):
            return NotImplemented
        p = float(power)
        return TangentBundle(
            self.value**p, self.tangents * (p * self.value ** (p - 1.0))
        )

    def __matmul__(self, other: Any) -> TangentBundle:
        if isinstance(other, TangentBundle):
            return NotImplemented
        w = _lift(other)
        if w is None:
            return NotImplemented
        return TangentBundle(self.value @ w, self._full_tangents() @ w)

    def __getitem__(self, key: Any) -> TangentBundle:
        parts = key if isinstance(key, tuple) else (key,)
        return TangentBundle(
            self.value[key], self._full_tangents()[(slice(None), *parts)]
        )

    # reductions and shape ----------------------------------------------------

    def sum(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> TangentBundle:
        nd = self.ndim
        if axis is None:
            axes: tuple[int, ...] = tuple(range(-nd, 0))
        else:
            axes = tuple(a - nd if a >= 0 else a for a in np.atleast_1d(axis).tolist())
        return TangentBundle(
            self.value.sum(axis=axes, keepdims=keepdims),
            self._full_tangents().sum(axis=axes, keepdims=keepdims),
        )

    def reshape(self, *shape: Any) -> TangentBundle:
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        value = self.value.reshape(shape)
        tan = self._full_tangents().reshape((self.n_directions, *value.shape))
        return TangentBundle(value, tan)

    # elementwise functions ---------------------------------------------------

    def exp(self) -> TangentBundle:
        e = _unary("exp", self.value)
        return TangentBundle(e, self.tangents * e)

    def log(self) -> TangentBundle:
        return TangentBundle(_unary("log", self.value), self.tangents / self.value)

    def tanh(self) -> TangentBundle:
        th = _unary("tanh", self.value)
        return TangentBundle(th, self.tangents * (1.0 - th * th))

    def sin(self) -> TangentBundle:
        return TangentBundle(
            _unary("sin", self.value), self.tangents * _unary("cos", self.value)
        )

    def cos(self) -> TangentBundle:
        return TangentBundle(
            _unary("cos", self.value), -self.tangents * _unary("sin", self.value)
        )

    def sqrt(self) -> TangentBundle:
        s = _unary("sqrt", self.value)
        return TangentBundle(s, self.tangents / (2.0 * s))


# structural operations with mixed bundle / plain operands -----------------------


def _tangent_of(x: Any, n: int, shape: tuple[int, ...]) -> Inner:
    if isinstance(x, TangentBundle):
        return _full(x.tangents, (n, *shape))
    return np.zeros((n, *shape))


def _value_of(x: Any) -> Inner:
    if isinstance(x, TangentBundle):
        return x.value
    if isinstance(x, Var):
        return x
    return np.asarray(x, dtype=np.float64)


def bundle_where(cond: np.ndarray, a: Any, b: Any) -> TangentBundle:
    av, bv = _value_of(a), _value_of(b)
    value = _where(cond, av, bv)
    n = (a if isinstance(a, TangentBundle) else b).n_directions
    shape = tuple(value.shape)
    ta = _tangent_of(a, n, shape) if isinstance(a, TangentBundle) else 0.0
    tb = _tangent_of(b, n, shape) if isinstance(b, TangentBundle) else 0.0
    return TangentBundle(value, _full(_where(cond, ta, tb), (n, *shape)))


def bundle_concat(parts: Sequence[Any], axis: int = -1) -> TangentBundle:
    if axis >= 0:
        raise ValueError("bundle concatenation requires a negative axis")
    n = next(p for p in parts if isinstance(p, TangentBundle)).n_directions
    values = [_value_of(p) for p in parts]
    tangents = [_tangent_of(p, n, tuple(v.shape)) for p, v in zip(parts, values)]
    return TangentBundle(_concat(values, axis), _concat(tangents, axis))


def bundle_take(x: TangentBundle, idx: np.ndarray) -> TangentBundle:
    return TangentBundle(_take(x.value, idx), _take(x._full_tangents(), idx))


def bundle_gather(x: TangentBundle, idx: np.ndarray) -> TangentBundle:
    return TangentBundle(_gather(x.value, idx), _gather(x._full_tangents(), idx))
