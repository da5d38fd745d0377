"""Time-gated elementwise affine layer."""

from __future__ import annotations

from typing import Any

import numpy as np

from tkrnet._diff import ParameterStore, ops
from tkrnet._flow.base import FlowLayer, LayerTime, Params, join_active, split_active

__all__ = ["ScaleBiasLayer"]


class ScaleBiasLayer(FlowLayer):
    """``y = exp(g * a) * x + g * b`` with ``g = tanh(exp(rho) * tau)``.

    ``exp(rho)`` keeps the rate positive; the gate vanishes at ``tau = 0`` so the
    layer starts as the identity.
    """

    def init_params(self, store: ParameterStore, rng: np.random.Generator) -> None:
        n = self.active
        store.add(self.key("a"), np.zeros(n))
        store.add(self.key("b"), np.zeros(n))
        store.add(self.key("rho"), np.zeros(n))

    def _gate(self, p: Params, time: LayerTime) -> Any:
        return ops.tanh(time.tau * ops.exp(p[self.key("rho")]))

    def forward(self, p: Params, x: Any, time: LayerTime) -> tuple[Any, Any]:
        xa, rest = split_active(x, self.active, self.dim)
        g = self._gate(p, time)
        ga = g * p[self.key("a")]
        y = ops.exp(ga) * xa + g * p[self.key("b")]
        return join_active(y, rest), ga.sum(axis=-1)

    def inverse(self, p: Params, y: Any, time: LayerTime) -> Any:
        ya, rest = split_active(y, self.active, self.dim)
        g = self._gate(p, time)
        x = (ya - g * p[self.key("b")]) * ops.exp(-(g * p[self.key("a")]))
        return join_active(x, rest)
