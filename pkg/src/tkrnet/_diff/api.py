"""Input-direction derivatives, parameter gradients and their nesting."""

from __future__ import annotations

from collections.abc import Callable
from typing import Any

import numpy as np

from tkrnet._diff.bundle import TangentBundle
from tkrnet._diff.ops import primal
from tkrnet._diff.params import BoundParameters, ParameterStore
from tkrnet._diff.tape import AdjointProgram, Var
from tkrnet._errors import DomainError, TrainingError

__all__ = [
    "directional_derivatives",
    "material_derivative",
    "nested_gradient",
    "parameter_gradient",
]

SpaceTimeFn = Callable[[Any, Any], Any]


def _points(x: Any, t: Any) -> tuple[np.ndarray, np.ndarray, bool]:
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    xa = np.atleast_2d(xa)
    if xa.ndim != 2:
        raise DomainError(f"x must have shape (d,) or (B, d), got {xa.shape}")
    ta = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    if ta.shape[0] not in (1, xa.shape[0]):
        raise DomainError(
            f"got {ta.shape[0]} time values for {xa.shape[0]} spatial points"
        )
    return xa, np.broadcast_to(ta, (xa.shape[0], 1)).copy(), single


def directional_derivatives(
    program: SpaceTimeFn,
    x: Any,
    t: Any,
    directions: Any,
    *,
    tape: AdjointProgram | None = None,
) -> tuple[Any, Any]:
    """Evaluate a scalar space-time field and its exact directional derivatives.

    Parameters
    ----------
    program : callable
        ``program(x, t) -> (B,)`` built from :mod:`tkrnet._diff.ops`
        operations, receiving ``x`` of shape ``(B, d)`` and ``t`` of shape
        ``(B, 1)``.
    x : array-like
        A single point ``(d,)`` or a batch ``(B, d)``.
    t : float or array-like
        A scalar time or one time per point.
    directions : array-like
        ``(n, d+1)`` shared directions or ``(n, B, d+1)`` per-point directions.
        The last entry of each direction is the time component.
    tape : AdjointProgram, optional
        Program to record on.  When given, ``x`` and ``t`` stay constants and
        the returned value/derivatives are recorded variables wherever the
        program depends on that tape's leaves, ready for
        :func:`parameter_gradient`.  When omitted a non-recording tape is used
        so non-finite intermediates still raise
        :class:`~tkrnet.EvaluationError` with the operation index.

    Returns
    -------
    value, derivs
        ``value`` has shape ``(B,)`` and ``derivs`` shape ``(n, B)`` (or scalar
        and ``(n,)`` for a single point).
    """
    xa, ta, single = _points(x, t)
    batch, dim = xa.shape
    dirs = np.asarray(directions, dtype=np.float64)
    if dirs.ndim == 1:
        dirs = dirs[None]
    if dirs.ndim == 2:
        dirs = np.broadcast_to(dirs[:, None, :], (dirs.shape[0], batch, dirs.shape[1]))
    if dirs.shape[0] == 0:
        raise ValueError("at least one direction is required")
    if dirs.shape[1:] != (batch, dim + 1):
        raise DomainError(
            f"directions must have trailing shape ({batch}, {dim + 1}), "
            f"got {dirs.shape[1:]}"
        )

    own = tape is None
    active = AdjointProgram(record=False) if tape is None else tape
    xv: Any = active.leaf(xa, "x") if own else xa
    tv: Any = active.leaf(ta, "t") if own else ta
    out = program(
        TangentBundle(xv, dirs[..., :dim]), TangentBundle(tv, dirs[..., dim:])
    )

    n = dirs.shape[0]
    if isinstance(out, TangentBundle):
        value = out.value.reshape((batch,))
        derivs = out._full_tangents().reshape((n, batch))
    else:
        value = np.broadcast_to(primal(out), (batch,)).copy()
        derivs = np.zeros((n, batch))
    if own:
        value, derivs = primal(value), primal(derivs)
    if single:
        return value[0], derivs[:, 0]
    return value, derivs


def material_derivative(
    program: SpaceTimeFn,
    x: Any,
    t: Any,
    velocity: Any,
    *,
    tape: AdjointProgram | None = None,
) -> tuple[Any, Any]:
    """Derivative of ``program`` along ``(velocity(x, t), 1)`` at every point.

    One direction gives ``d/dt + velocity . grad_x`` exactly, so the log-form
    Liouville residual costs a single tangent instead of ``d+1``.
    """
    xa, ta, single = _points(x, t)
    v = np.asarray(velocity, dtype=np.float64).reshape(xa.shape)
    dirs = np.concatenate([v, np.ones((xa.shape[0], 1))], axis=-1)[None]
    value, derivs = directional_derivatives(
        program, xa, ta, dirs, tape=tape
    )
    if single:
        return value[0], derivs[0, 0]
    return value, derivs[0]


def parameter_gradient(loss: Var, params: BoundParameters) -> np.ndarray:
    """Gradient of a recorded scalar ``loss`` aligned with the store's vector.

    Segments the loss does not depend on get zeros; buffers are not part of the
    vector and therefore never receive a gradient.
    """
    if not isinstance(loss, Var):
        return np.zeros(params.store.size)
    return params.store.gradient(params, params.program.backward(loss))


def nested_gradient(
    objective: Callable[[BoundParameters], Any], store: ParameterStore
) -> tuple[float, np.ndarray]:
    """Evaluate ``objective`` on freshly bound parameters and differentiate it.

    The objective may square or otherwise combine input derivatives obtained
    with :func:`directional_derivatives` (passing ``tape=params.program``):
    those bundles carry recorded components, so the reverse sweep
    differentiates through them and the result is exact.

    Returns
    -------
    loss, gradient
        The scalar loss value and its gradient over ``store.vector``.
    """
    program = AdjointProgram()
    params = store.bind(program)
    loss = objective(params)
    value = float(np.asarray(primal(loss)).reshape(()))
    if not np.isfinite(value):
        raise TrainingError("non-finite loss")
    return value, parameter_gradient(loss, params)
