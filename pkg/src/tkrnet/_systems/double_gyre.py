"""Time-periodic double gyre flow."""

from __future__ import annotations

import math
from typing import Any, Literal

import numpy as np
from pydantic import Field, PositiveFloat

from tkrnet._diff import ops
from tkrnet._systems.base import BaseSystemConfig, GaussianDensity, SystemSpec

__all__ = ["DoubleGyreConfig", "double_gyre"]


class DoubleGyreConfig(BaseSystemConfig):
    """Double gyre ``f = [-pi A sin(pi g) cos(pi y), pi A cos(pi g) sin(pi y) dg/dx]``.

    with ``g(x, t) = a(t) x**2 + b(t) x``, ``a = eps sin(w t)`` and
    ``b = 1 - 2 eps sin(w t)``.
    """

    name: Literal["double_gyre"] = "double_gyre"
    t_final: PositiveFloat = Field(default=5.0, description="Final time T")
    amplitude: float = Field(default=0.1, description="Velocity amplitude A")
    omega: float = Field(
        default=2 * math.pi / 10, description="Angular frequency w of the oscillation"
    )
    epsilon: float = Field(default=0.25, description="Oscillation magnitude eps")
    initial_mean: tuple[float, float] = Field(
        default=(1.0, 0.5), description="Mean of the Gaussian initial density"
    )
    initial_std: PositiveFloat = Field(
        default=0.05, description="Standard deviation of the initial density"
    )

    def build(self) -> SystemSpec:
        amp, w, eps = self.amplitude, self.omega, self.epsilon

        def velocity(x: Any, t: Any) -> Any:
            x1, x2 = x[..., 0:1], x[..., 1:2]
            s = eps * ops.sin(w * t)
            a, b = s, 1.0 - 2.0 * s
            g = a * (x1 * x1) + b * x1
            f1 = -math.pi * amp * ops.sin(math.pi * g) * ops.cos(math.pi * x2)
            f2 = (
                math.pi
                * amp
                * ops.cos(math.pi * g)
                * ops.sin(math.pi * x2)
                * (2.0 * a * x1 + b)
            )
            return ops.concat([f1, f2], axis=-1)

        def divergence(x: np.ndarray, t: Any) -> np.ndarray:
            return np.zeros(x.shape[:-1])

        return SystemSpec(
            name=self.name,
            dim=2,
            velocity=velocity,
            divergence=divergence,
            initial=GaussianDensity.isotropic(self.initial_mean, self.initial_std),
            box_low=np.array([0.0, 0.0]),
            box_high=np.array([2.0, 1.0]),
            t_final=self.t_final,
        )


def double_gyre(**overrides: Any) -> SystemSpec:
    """Double gyre system with the standard coefficients unless overridden."""
    return DoubleGyreConfig(**overrides).build()
