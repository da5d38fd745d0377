"""Liouville residuals and the training losses built from them."""

from __future__ import annotations

from typing import Any, Protocol

import numpy as np

from tkrnet._diff import (
    AdjointProgram,
    BoundParameters,
    TangentBundle,
    directional_derivatives,
    material_derivative,
    ops,
)
from tkrnet._errors import DomainError
from tkrnet._flow import DensityModel
from tkrnet._systems import SystemSpec
from tkrnet._types import LossVariant

__all__ = [
    "DensityModelView",
    "batch_loss",
    "interface_cross_entropy",
    "ode_loss",
    "ode_residual",
    "residual",
    "residual_log",
]


class InvertibleModel(Protocol):
    def forward(self, x: Any, t: Any, params: Any = None) -> tuple[Any, Any]: ...

    def inverse(self, z: Any, t: Any, params: Any = None) -> Any: ...


def _space_time(x: Any, t: Any) -> tuple[np.ndarray, np.ndarray]:
    xa = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if xa.shape[0] == 0:
        raise DomainError("empty batch")
    ta = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    if ta.shape[0] not in (1, xa.shape[0]):
        raise DomainError(f"got {ta.shape[0]} time values for {xa.shape[0]} points")
    return xa, np.broadcast_to(ta, (xa.shape[0], 1)).copy()


class DensityModelView:
    """A density model evaluated with stored or bound parameters.

    Parameters
    ----------
    model : DensityModel
        Any model providing ``log_density(x, t, params)``.
    params : BoundParameters, optional
        Parameters registered on an adjoint program.  When given, every value
        the view returns is recorded on ``params.program`` so losses built
        from it can be differentiated.
    """

    def __init__(self, model: DensityModel, params: BoundParameters | None = None):
        self.model = model
        self.params = params

    def __repr__(self) -> str:
        bound = "bound" if self.params is not None else "stored"
        return f"DensityModelView({self.model!r}, {bound})"

    @property
    def tape(self) -> AdjointProgram | None:
        return None if self.params is None else self.params.program

    def log_density(self, x: Any, t: Any) -> Any:
        if self.params is None:
            return self.model.log_density(x, t)
        return self.model.log_density(x, t, self.params)

    def density(self, x: Any, t: Any) -> Any:
        return ops.exp(self.log_density(x, t))

    def derivatives(self, x: Any, t: Any) -> tuple[Any, Any, Any]:
        """``(log p, d/dt log p, grad_x log p)`` at each point.

        Uses the ``d + 1`` coordinate directions; shapes are ``(B,)``, ``(B,)``
        and ``(B, d)``.
        """
        xa, ta = _space_time(x, t)
        d = xa.shape[1]
        dirs = np.eye(d + 1)
        value, derivs = directional_derivatives(
            self.log_density, xa, ta, dirs, tape=self.tape
        )
        grad = derivs[:d]
        grad = grad.T if isinstance(grad, np.ndarray) else _transpose(grad)
        return value, derivs[d], grad


def _transpose(v: Any) -> Any:
    rows = [v[i].reshape(-1, 1) for i in range(v.shape[0])]
    return ops.concat(rows, axis=-1)


def _log_parts(
    view: DensityModelView, system: SystemSpec, x: Any, t: Any
) -> tuple[Any, Any]:
    xa, ta = _space_time(x, t)
    velocity = ops.primal(system.f(xa, ta))
    value, deriv = material_derivative(
        view.log_density, xa, ta, velocity, tape=view.tape
    )
    return value, deriv + system.div_f(xa, ta)


def residual_log(view: DensityModelView, system: SystemSpec, x: Any, t: Any) -> Any:
    """``r_log = d/dt log p + grad_x log p . f + div_x f`` per point."""
    return _log_parts(view, system, x, t)[1]


def residual(view: DensityModelView, system: SystemSpec, x: Any, t: Any) -> Any:
    """``r = d/dt p + div_x(p f)`` per point, evaluated as ``p * r_log``."""
    logp, r_log = _log_parts(view, system, x, t)
    return ops.exp(logp) * r_log


def _mean(v: Any) -> Any:
    n = int(np.prod(ops.primal(v).shape))
    if n == 0:
        raise DomainError("empty batch")
    return v.sum() * (1.0 / n)


def ode_residual(
    model: InvertibleModel,
    system: SystemSpec,
    x: Any,
    t: Any,
    params: BoundParameters | None = None,
) -> Any:
    """Squared mismatch between the inverse map's time derivative and ``f``.

    With ``z = T(x, t)`` held fixed, ``X(t) = T^{-1}(z, t)`` should follow
    the characteristic, so the residual is ``|dX/dt - f(X, t)|^2``.
    """
    xa, ta = _space_time(x, t)
    z = ops.primal(model.forward(xa, ta)[0])
    zb = TangentBundle(z, np.zeros((1, *z.shape)))
    tb = TangentBundle(ta, np.ones((1, *ta.shape)))
    xhat = model.inverse(zb, tb, params)
    if not isinstance(xhat, TangentBundle):
        xhat = TangentBundle(xhat, np.zeros((1, *ops.primal(xhat).shape)))
    dx_dt = xhat._full_tangents()[0]
    diff = dx_dt - system.f(xhat.value, ta)
    return (diff * diff).sum(axis=-1)


def ode_loss(
    model: InvertibleModel,
    system: SystemSpec,
    x: Any,
    t: Any,
    params: BoundParameters | None = None,
) -> Any:
    """Batch mean of :func:`ode_residual`."""
    return _mean(ode_residual(model, system, x, t, params))


def batch_loss(
    view: DensityModelView,
    system: SystemSpec,
    x: Any,
    t: Any,
    variant: LossVariant | str = LossVariant.LOG,
) -> Any:
    """Mean squared residual over one mini-batch.

    Returns a recorded scalar when ``view`` holds bound parameters, and a plain
    float array otherwise.
    """
    variant = LossVariant(variant)
    if variant is LossVariant.ODE:
        return ode_loss(view.model, system, x, t, view.params)  # type: ignore[arg-type]
    if variant is LossVariant.PLAIN:
        r = residual(view, system, x, t)
    else:
        r = residual_log(view, system, x, t)
    return _mean(r * r)


def interface_cross_entropy(
    view: DensityModelView, samples: Any, t_prev: float
) -> Any:
    """``-mean(log p(x_j, T_prev))`` over samples of the previous interval."""
    xa, ta = _space_time(samples, t_prev)
    return -_mean(view.log_density(xa, ta))
