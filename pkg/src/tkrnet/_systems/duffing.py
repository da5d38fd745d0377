"""Forced Duffing oscillator with five random parameters."""

from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import Field, PositiveFloat

from tkrnet._diff import ops
from tkrnet._systems.base import (
    BaseSystemConfig,
    GaussianDensity,
    SystemSpec,
    augment,
)

__all__ = ["DuffingConfig", "duffing"]


def _field(y: Any, xi: Any, t: Any) -> Any:
    # xi = [delta, alpha, beta, gamma, omega]
    y1, y2 = y[..., 0:1], y[..., 1:2]
    delta, alpha, beta = xi[..., 0:1], xi[..., 1:2], xi[..., 2:3]
    gamma, omega = xi[..., 3:4], xi[..., 4:5]
    dy2 = -(delta * y2) - y1 * (alpha + beta * (y1 * y1)) + gamma * ops.cos(omega * t)
    return ops.concat([y2, dy2], axis=-1)


def _divergence(y: np.ndarray, xi: np.ndarray, t: Any) -> np.ndarray:
    return -xi[..., 0]


class DuffingConfig(BaseSystemConfig):
    """Augmented state ``x = [y1, y2, delta, alpha, beta, gamma, omega]``.

    ``dy1/dt = y2``, ``dy2/dt = -delta y2 - y1 (alpha + beta y1**2) +
    gamma cos(omega t)``; the parameters are constant in time.
    """

    name: Literal["duffing"] = "duffing"
    t_final: PositiveFloat = Field(default=2.0, description="Final time T")
    state_mean: tuple[float, float] = Field(
        default=(0.0, 0.0), description="Mean of the initial oscillator state"
    )
    state_std: PositiveFloat = Field(
        default=1.0, description="Standard deviation of the initial oscillator state"
    )
    parameter_mean: tuple[float, float, float, float, float] = Field(
        default=(0.5, -1.0, 1.0, 0.5, 1.0),
        description="Mean of (delta, alpha, beta, gamma, omega)",
    )
    parameter_std: PositiveFloat = Field(
        default=0.25, description="Standard deviation of each random parameter"
    )
    box: tuple[float, float] = Field(
        default=(-5.0, 5.0), description="Per-coordinate initial collocation bounds"
    )

    def build(self) -> SystemSpec:
        return augment(
            _field,
            _divergence,
            GaussianDensity.isotropic(self.state_mean, self.state_std),
            GaussianDensity.isotropic(self.parameter_mean, self.parameter_std),
            name=self.name,
            box=self.box,
            t_final=self.t_final,
        )


def duffing(**overrides: Any) -> SystemSpec:
    """Augmented Duffing oscillator (dimension 7)."""
    return DuffingConfig(**overrides).build()
