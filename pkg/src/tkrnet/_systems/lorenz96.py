"""Lorenz-96 model with cyclic boundary."""

from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import Field, PositiveFloat, PositiveInt, field_validator

from tkrnet._diff import ops
from tkrnet._systems.base import BaseSystemConfig, GaussianDensity, SystemSpec

__all__ = ["Lorenz96Config", "lorenz96", "lorenz96_initial_mean"]


def lorenz96_initial_mean(dim: int) -> np.ndarray:
    """Tent-shaped initial mean ``0.5 - |i/d - 0.5|`` for ``i = 1..d``."""
    i = np.arange(1, dim + 1, dtype=np.float64)
    return 0.5 - np.abs(i / dim - 0.5)


class Lorenz96Config(BaseSystemConfig):
    """``dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F`` with cyclic indices."""

    name: Literal["lorenz96"] = "lorenz96"
    t_final: PositiveFloat = Field(default=1.0, description="Final time T")
    dim: PositiveInt = Field(default=40, description="Number of state variables d")
    forcing: float = Field(default=1.0, description="Constant forcing F")
    initial_std: PositiveFloat = Field(
        default=0.2, description="Standard deviation of the initial density"
    )
    box: tuple[float, float] = Field(
        default=(-5.0, 5.0), description="Per-coordinate initial collocation bounds"
    )

    @field_validator("dim")
    @classmethod
    def _validate_dim(cls, v: int) -> int:
        if v < 4:
            raise ValueError(f"Lorenz-96 requires at least 4 variables, got {v}")
        return v

    def build(self) -> SystemSpec:
        d, forcing = self.dim, self.forcing
        i = np.arange(d)
        plus1, minus1, minus2 = (i + 1) % d, (i - 1) % d, (i - 2) % d

        def velocity(x: Any, t: Any) -> Any:
            xp1 = ops.take(x, plus1)
            xm1 = ops.take(x, minus1)
            xm2 = ops.take(x, minus2)
            return (xp1 - xm2) * xm1 - x + forcing

        def divergence(x: np.ndarray, t: Any) -> np.ndarray:
            return np.full(x.shape[:-1], -float(d))

        return SystemSpec(
            name=self.name,
            dim=d,
            velocity=velocity,
            divergence=divergence,
            initial=GaussianDensity.isotropic(
                lorenz96_initial_mean(d), self.initial_std
            ),
            box_low=np.full(d, self.box[0]),
            box_high=np.full(d, self.box[1]),
            t_final=self.t_final,
        )


def lorenz96(dim: int = 40, forcing: float = 1.0, **overrides: Any) -> SystemSpec:
    """Lorenz-96 system of ``dim`` variables with constant forcing."""
    return Lorenz96Config(dim=dim, forcing=forcing, **overrides).build()
