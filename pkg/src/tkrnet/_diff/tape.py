"""Reverse-mode recording of vectorized numpy programs.

An :class:`AdjointProgram` owns a linear list of :class:`Var` nodes.  Every
operation on a ``Var`` evaluates eagerly with numpy, checks the result for
non-finite entries and (when recording) stores a vector-Jacobian product per
operand.  :meth:`AdjointProgram.backward` then sweeps the list once in reverse
operation order.
"""

from __future__ import annotations

import numbers
from collections.abc import Callable, Sequence
from typing import Any, TypeAlias

import numpy as np

from tkrnet._errors import EvaluationError

__all__ = ["AdjointProgram", "Var"]

VJP: TypeAlias = Callable[[np.ndarray], np.ndarray]
Operand: TypeAlias = "Var | np.ndarray"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1
    )
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class AdjointProgram:
    """Single-owner recording of one scalar-valued computation.

    Parameters
    ----------
    record : bool, default True
        When False, operations are still counted and checked for finiteness but
        no graph is kept, so :meth:`backward` is unavailable.  Used for
        inference passes that want the same diagnostics.
    """

    def __init__(self, record: bool = True) -> None:
        self.record = record
        self._nodes: list[Var] = []
        self._count = 0

    @property
    def op_count(self) -> int:
        """Number of operations (including leaves) evaluated so far."""
        return self._count

    def leaf(self, value: Any, name: str = "leaf") -> Var:
        """Create an input variable holding a float64 copy of ``value``."""
        arr = np.array(value, dtype=np.float64)
        var = self._emit(arr, (), (), name)
        var.is_leaf = True
        return var

    def _emit(
        self,
        value: np.ndarray,
        parents: tuple[Var, ...],
        vjps: tuple[VJP, ...],
        name: str,
    ) -> Var:
        index = self._count
        self._count += 1
        if not np.all(np.isfinite(value)):
            raise EvaluationError(index, name)
        if not self.record:
            return Var(self, value, index, (), (), name)
        var = Var(self, value, index, parents, vjps, name)
        self._nodes.append(var)
        return var

    def backward(self, output: Var) -> dict[Var, np.ndarray]:
        """Return d(output)/d(leaf) for every leaf the output depends on."""
        if not self.record:
            raise RuntimeError("backward() requires a recording program")
        if output.program is not self:
            raise ValueError("output was not produced by this program")
        if output.value.size != 1:
            raise ValueError(
                f"backward() requires a scalar output, got shape {output.shape}"
            )
        adjoints: dict[int, np.ndarray] = {output.index: np.ones_like(output.value)}
        grads: dict[Var, np.ndarray] = {}
        with np.errstate(all="ignore"):
            for node in reversed(self._nodes[: output.index + 1]):
                g = adjoints.pop(node.index, None)
                if g is None:
                    continue
                if node.is_leaf:
                    grads[node] = g
                    continue
                for parent, vjp in zip(node.parents, node.vjps):
                    pg = _unbroadcast(np.asarray(vjp(g)), parent.value.shape)
                    if parent.index in adjoints:
                        adjoints[parent.index] = adjoints[parent.index] + pg
                    else:
                        adjoints[parent.index] = pg
        return grads


def _val(x: Operand) -> np.ndarray:
    return x.value if isinstance(x, Var) else x


def _node(
    operands: Sequence[Operand], vjps: Sequence[VJP], value: np.ndarray, name: str
) -> Var:
    program: AdjointProgram | None = None
    parents: list[Var] = []
    kept: list[VJP] = []
    for op, vjp in zip(operands, vjps):
        if isinstance(op, Var):
            if program is None:
                program = op.program
            elif op.program is not program:
                raise ValueError("operands belong to different programs")
            parents.append(op)
            kept.append(vjp)
    if program is None:  # pragma: no cover
        raise TypeError("at least one operand must be a Var")
    return program._emit(value, tuple(parents), tuple(kept), name)


def _is_basic_index(key: Any) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(
        isinstance(k, slice | int) or k is Ellipsis or k is None for k in parts
    )


def _coerce(other: Any) -> Operand | None:
    if isinstance(other, Var):
        return other
    if isinstance(other, np.ndarray | numbers.Real):
        return np.asarray(other, dtype=np.float64)
    return None


class Var:
    """A recorded array value inside an :class:`AdjointProgram`."""

    __array_ufunc__ = None
    __slots__ = ("index", "is_leaf", "name", "parents", "program", "value", "vjps")

    def __init__(
        self,
        program: AdjointProgram,
        value: np.ndarray,
        index: int,
        parents: tuple[Var, ...],
        vjps: tuple[VJP, ...],
        name: str,
    ) -> None:
        self.program = program
        self.value = value
        self.index = index
        self.parents = parents
        self.vjps = vjps
        self.name = name
        self.is_leaf = False

    def __repr__(self) -> str:
        return f"Var(#{self.index} {self.name}, shape={self.shape})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape  # type: ignore[no-any-return]

    @property
    def ndim(self) -> int:
        return self.value.ndim  # type: ignore[no-any-return]

    @property
    def size(self) -> int:
        return self.value.size  # type: ignore[no-any-return]

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return add(self, b)

    def __radd__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return add(b, self)

    def __sub__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return sub(self, b)

    def __rsub__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return sub(b, self)

    def __mul__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return mul(self, b)

    def __rmul__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return mul(b, self)

    def __truediv__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return div(self, b)

    def __rtruediv__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return div(b, self)

    def __neg__(self) -> Var:
        return _node([self], [lambda g: -g], -self.value, "neg")

    def __pow__(self, power: float) -> Var:
        if not isinstance(power, numbers.Real):
            return NotImplemented
        p = float(power)
        v = self.value
        with np.errstate(all="ignore"):
            out = v**p
        return _node([self], [lambda g: g * p * v ** (p - 1.0)], out, "pow")

    def __matmul__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return matmul(self, b)

    def __rmatmul__(self, other: Any) -> Var:
        b = _coerce(other)
        if b is None:
            return NotImplemented
        return matmul(b, self)

    def __getitem__(self, key: Any) -> Var:
        shape = self.value.shape
        basic = _is_basic_index(key)

        def vjp(g: np.ndarray) -> np.ndarray:
            out = np.zeros(shape)
            if basic:
                out[key] = g
            else:
                np.add.at(out, key, g)
            return out

        return _node([self], [vjp], self.value[key], "getitem")

    # reductions and shape ----------------------------------------------------

    def sum(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> Var:
        shape = self.value.shape

        def vjp(g: np.ndarray) -> np.ndarray:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape)

        out = self.value.sum(axis=axis, keepdims=keepdims)
        return _node([self], [vjp], np.asarray(out), "sum")

    def reshape(self, *shape: Any) -> Var:
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        original = self.value.shape
        out = self.value.reshape(shape)
        return _node([self], [lambda g: g.reshape(original)], out, "reshape")

    # elementwise functions ---------------------------------------------------

    def exp(self) -> Var:
        with np.errstate(all="ignore"):
            e = np.exp(self.value)
        return _node([self], [lambda g: g * e], e, "exp")

    def log(self) -> Var:
        v = self.value
        with np.errstate(all="ignore"):
            out = np.log(v)
        return _node([self], [lambda g: g / v], out, "log")

    def tanh(self) -> Var:
        th = np.tanh(self.value)
        return _node([self], [lambda g: g * (1.0 - th * th)], th, "tanh")

    def sin(self) -> Var:
        v = self.value
        return _node([self], [lambda g: g * np.cos(v)], np.sin(v), "sin")

    def cos(self) -> Var:
        v = self.value
        return _node([self], [lambda g: -g * np.sin(v)], np.cos(v), "cos")

    def sqrt(self) -> Var:
        with np.errstate(all="ignore"):
            s = np.sqrt(self.value)
        return _node([self], [lambda g: g / (2.0 * s)], s, "sqrt")


# binary kernels ---------------------------------------------------------------


def add(a: Operand, b: Operand) -> Var:
    with np.errstate(all="ignore"):
        out = _val(a) + _val(b)
    return _node([a, b], [lambda g: g, lambda g: g], out, "add")


def sub(a: Operand, b: Operand) -> Var:
    with np.errstate(all="ignore"):
        out = _val(a) - _val(b)
    return _node([a, b], [lambda g: g, lambda g: -g], out, "sub")


def mul(a: Operand, b: Operand) -> Var:
    av, bv = _val(a), _val(b)
    with np.errstate(all="ignore"):
        out = av * bv
    return _node([a, b], [lambda g: g * bv, lambda g: g * av], out, "mul")


def div(a: Operand, b: Operand) -> Var:
    av, bv = _val(a), _val(b)
    with np.errstate(all="ignore"):
        out = av / bv
    return _node([a, b], [lambda g: g / bv, lambda g: -g * out / bv], out, "div")


def matmul(a: Operand, b: Operand) -> Var:
    """``a @ b`` with ``b`` a 2-D matrix and ``a`` of shape ``(..., n)``."""
    av, bv = _val(a), _val(b)
    if bv.ndim != 2:
        raise ValueError(f"right matmul operand must be 2-D, got shape {bv.shape}")
    n, m = bv.shape
    with np.errstate(all="ignore"):
        out = av @ bv
    return _node(
        [a, b],
        [
            lambda g: g @ bv.T,
            lambda g: av.reshape(-1, n).T @ g.reshape(-1, m),
        ],
        out,
        "matmul",
    )


def where(cond: np.ndarray, a: Operand, b: Operand) -> Var:
    out = np.where(cond, _val(a), _val(b))
    return _node(
        [a, b],
        [lambda g: np.where(cond, g, 0.0), lambda g: np.where(cond, 0.0, g)],
        out,
        "where",
    )


def concat(parts: Sequence[Operand], axis: int = -1) -> Var:
    values = [_val(p) for p in parts]
    splits = np.cumsum([v.shape[axis] for v in values])[:-1]

    def make_vjp(i: int) -> VJP:
        return lambda g: np.split(g, splits, axis=axis)[i]

    return _node(
        list(parts),
        [make_vjp(i) for i in range(len(parts))],
        np.concatenate(values, axis=axis),
        "concat",
    )


def take(x: Var, indices: np.ndarray) -> Var:
    """Select last-axis entries ``x[..., indices]`` (indices may repeat)."""
    shape = x.value.shape

    key = (slice(None),) * (len(shape) - 1) + (indices,)

    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return out

    return _node([x], [vjp], np.take(x.value, indices, axis=-1), "take")


def gather(x: Var, indices: np.ndarray) -> Var:
    """Per-row last-axis gather; ``indices`` broadcasts against ``x[..., :k]``."""
    shape = x.value.shape
    idx = np.broadcast_to(indices, shape[:-1] + indices.shape[-1:])

    def vjp(g: np.ndarray) -> np.ndarray:
        out = np.zeros(shape)
        grids = np.indices(idx.shape, sparse=True)
        np.add.at(out, (*grids[:-1], idx), g)
        return out

    return _node([x], [vjp], np.take_along_axis(x.value, idx, axis=-1), "gather")
