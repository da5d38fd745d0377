"""Three-mode Kraichnan-Orszag system."""

from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import Field, PositiveFloat

from tkrnet._diff import ops
from tkrnet._systems.base import BaseSystemConfig, GaussianDensity, SystemSpec

__all__ = ["KraichnanOrszagConfig", "kraichnan_orszag"]


class KraichnanOrszagConfig(BaseSystemConfig):
    """``f = [x1 x3, -x2 x3, -x1**2 + x2**2]`` (divergence free)."""

    name: Literal["kraichnan_orszag"] = "kraichnan_orszag"
    t_final: PositiveFloat = Field(default=3.0, description="Final time T")
    initial_mean: tuple[float, float, float] = Field(
        default=(1.0, 0.0, 0.0), description="Mean of the Gaussian initial density"
    )
    initial_std: PositiveFloat = Field(
        default=0.5, description="Standard deviation of the initial density"
    )
    box: tuple[float, float] = Field(
        default=(-5.0, 5.0), description="Per-coordinate initial collocation bounds"
    )

    def build(self) -> SystemSpec:
        def velocity(x: Any, t: Any) -> Any:
            x1, x2, x3 = x[..., 0:1], x[..., 1:2], x[..., 2:3]
            return ops.concat([x1 * x3, -(x2 * x3), x2 * x2 - x1 * x1], axis=-1)

        def divergence(x: np.ndarray, t: Any) -> np.ndarray:
            return np.zeros(x.shape[:-1])

        return SystemSpec(
            name=self.name,
            dim=3,
            velocity=velocity,
            divergence=divergence,
            initial=GaussianDensity.isotropic(self.initial_mean, self.initial_std),
            box_low=np.full(3, self.box[0]),
            box_high=np.full(3, self.box[1]),
            t_final=self.t_final,
        )


def kraichnan_orszag(**overrides: Any) -> SystemSpec:
    """Kraichnan-Orszag system with the standard initial density."""
    return KraichnanOrszagConfig(**overrides).build()
