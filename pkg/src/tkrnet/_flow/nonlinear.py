"""Time-dependent monotone piecewise-quadratic layer."""

from __future__ import annotations

from typing import Any

import numpy as np

from tkrnet._diff import ParameterStore, ops
from tkrnet._errors import FlowError
from tkrnet._flow.base import FlowLayer, LayerTime, Params

__all__ = ["NonlinearLayer"]


class NonlinearLayer(FlowLayer):
    """Elementwise ``2a F((x + a) / 2a) - a`` on ``[-a, a]``, identity outside.

    ``F`` is the integral of the piecewise-linear density with node values
    ``w_i`` on a uniform mesh of ``mesh_size + 2`` nodes over ``[0, 1]``.  The
    unnormalized weights are ``exp(tanh(exp(rho_i) tau) psi_i)``; they are
    normalized so that ``F(1) = 1``.  With every ``psi_i = 0`` (or ``tau = 0``)
    the layer is the identity.  The parameters are shared by all coordinates.
    """

    def __init__(self, prefix: str, dim: int, *, mesh_size: int, bound: float) -> None:
        super().__init__(prefix, dim, dim)
        self.mesh_size = mesh_size
        self.bound = bound
        self.h = 1.0 / (mesh_size + 1)
        nodes = mesh_size + 2
        # tri[j, i] = 1 for j < i: cumulative element masses at each node
        self._tri = np.triu(np.ones((nodes - 1, nodes)), k=1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.mesh_size + 2)

    def init_params(self, store: ParameterStore, rng: np.random.Generator) -> None:
        store.add(self.key("psi"), np.zeros(self.mesh_size + 2))
        store.add(self.key("rho"), np.zeros(self.mesh_size + 2))

    def weights(self, p: Params, time: LayerTime) -> tuple[Any, Any]:
        """Normalized node weights ``w`` and node values of ``F``, both ``(B, m+2)``."""
        g = ops.tanh(time.tau * ops.exp(p[self.key("rho")]))
        w_hat = ops.exp(g * p[self.key("psi")])
        pair = (w_hat[..., :-1] + w_hat[..., 1:]) * (0.5 * self.h)
        c_w = pair.sum(axis=-1, keepdims=True)
        return w_hat / c_w, (pair / c_w) @ self._tri

    def _local(self, w: Any, f_nodes: Any, e: np.ndarray) -> tuple[Any, Any, Any]:
        return ops.gather(w, e), ops.gather(w, e + 1), ops.gather(f_nodes, e)

    def forward(self, p: Params, x: Any, time: LayerTime) -> tuple[Any, Any]:
        a, h = self.bound, self.h
        w, f_nodes = self.weights(p, time)
        u = (x + a) / (2.0 * a)
        u0 = ops.primal(u)
        inside = (u0 >= 0.0) & (u0 <= 1.0)
        uc = ops.where(inside, u, 0.5)
        e = np.clip(np.floor(ops.primal(uc) / h), 0, self.mesh_size).astype(np.intp)
        xi = uc - e * h
        w_e, w_e1, f_e = self._local(w, f_nodes, e)
        slope = w_e1 - w_e
        value = f_e + w_e * xi + slope * (xi * xi) * (0.5 / h)
        deriv = w_e + slope * xi * (1.0 / h)
        y = ops.where(inside, 2.0 * a * value - a, x)
        logdet = ops.where(inside, ops.log(deriv), 0.0).sum(axis=-1)
        return y, logdet

    def inverse(self, p: Params, y: Any, time: LayerTime) -> Any:
        a, h = self.bound, self.h
        w, f_nodes = self.weights(p, time)
        v = (y + a) / (2.0 * a)
        v0 = ops.primal(v)
        inside = (v0 >= 0.0) & (v0 <= 1.0)
        vc = ops.where(inside, v, 0.5)
        interior = ops.primal(f_nodes)[..., None, 1 : self.mesh_size + 1]
        e = np.sum(interior <= ops.primal(vc)[..., None], axis=-1).astype(np.intp)
        w_e, w_e1, f_e = self._local(w, f_nodes, e)
        slope = w_e1 - w_e
        c = vc - f_e
        disc = w_e * w_e + slope * c * (2.0 / h)
        if np.any(ops.primal(disc) <= 0.0):
            raise FlowError("nonlinear layer inversion found no root in the element")
        xi = 2.0 * c / (w_e + ops.sqrt(disc))
        xi0 = ops.primal(xi)
        tol = 1e-9 * h
        if np.any(inside & ((xi0 < -tol) | (xi0 > h + tol))):
            raise FlowError("nonlinear layer element search failed")
        x = 2.0 * a * (e * h + xi) - a
        return ops.where(inside, x, y)
