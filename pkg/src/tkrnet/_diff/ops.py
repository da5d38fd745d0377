"""Elementary operations that accept arrays, recorded variables or bundles.

Model and vector-field code is written once against these functions and then
runs unchanged on plain ``ndarray`` inputs (inference, integration), on
:class:`Var` (parameter gradients) and on :class:`TangentBundle` (input
derivatives), including bundles whose components are themselves ``Var``.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any, TypeAlias

import numpy as np

from tkrnet._diff import tape
from tkrnet._diff.bundle import (
    TangentBundle,
    bundle_concat,
    bundle_gather,
    bundle_take,
    bundle_where,
)
from tkrnet._diff.tape import Var

__all__ = [
    "Tensor",
    "concat",
    "cos",
    "exp",
    "gather",
    "log",
    "primal",
    "silu",
    "sin",
    "sqrt",
    "take",
    "tanh",
    "where",
]

Tensor: TypeAlias = "np.ndarray | Var | TangentBundle"


def primal(x: Any) -> np.ndarray:
    """Strip bundles and recorded variables down to the plain numeric value."""
    while isinstance(x, TangentBundle):
        x = x.value
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _unary(name: str) -> Any:
    np_fn = getattr(np, name)

    def op(x: Any) -> Any:
        if isinstance(x, Var | TangentBundle):
            return getattr(x, name)()
        return np_fn(x)

    op.__name__ = name
    op.__doc__ = f"Elementwise ``{name}``."
    return op


exp = _unary("exp")
log = _unary("log")
tanh = _unary("tanh")
sin = _unary("sin")
cos = _unary("cos")
sqrt = _unary("sqrt")


def silu(x: Any) -> Any:
    """SiLU ``x / (1 + exp(-x))``, written through ``tanh`` so it never overflows."""
    return x * (0.5 * (1.0 + tanh(0.5 * x)))


def where(cond: np.ndarray, a: Any, b: Any) -> Any:
    """Piecewise selection; ``cond`` comes from primal values only.

    Only the selected branch contributes derivatives.  Both branches are still
    evaluated everywhere, so callers keep the unselected branch finite.
    """
    cond = np.asarray(cond, dtype=bool)
    if isinstance(a, TangentBundle) or isinstance(b, TangentBundle):
        return bundle_where(cond, a, b)
    if isinstance(a, Var) or isinstance(b, Var):
        return tape.where(cond, a, b)
    return np.where(cond, a, b)


def concat(parts: Sequence[Any], axis: int = -1) -> Any:
    """Concatenate along a (negative) axis."""
    if any(isinstance(p, TangentBundle) for p in parts):
        return bundle_concat(parts, axis=axis)
    if any(isinstance(p, Var) for p in parts):
        return tape.concat(parts, axis=axis)
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=axis)


def take(x: Any, indices: Any) -> Any:
    """Select last-axis entries, ``x[..., indices]``."""
    idx = np.asarray(indices, dtype=np.intp)
    if isinstance(x, TangentBundle):
        return bundle_take(x, idx)
    if isinstance(x, Var):
        return tape.take(x, idx)
    return np.take(x, idx, axis=-1)


def gather(x: Any, indices: np.ndarray) -> Any:
    """Row-wise last-axis gather (``take_along_axis`` with broadcast indices)."""
    idx = np.asarray(indices, dtype=np.intp)
    if isinstance(x, TangentBundle):
        return bundle_gather(x, idx)
    if isinstance(x, Var):
        return tape.gather(x, idx)
    idx = np.broadcast_to(idx, x.shape[:-1] + idx.shape[-1:])
    return np.take_along_axis(x, idx, axis=-1)
