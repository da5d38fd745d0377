"""Base types shared by all benchmark dynamical systems."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from pydantic import ConfigDict, BaseModel, Field, PositiveFloat, model_validator
from typing_extensions import Self

from tkrnet._diff import ops
from tkrnet._errors import DomainError
from tkrnet._types import FloatArray

__all__ = ["BaseSystemConfig", "GaussianDensity", "SystemSpec", "augment"]

VectorField = Callable[[Any, Any], Any]
Divergence = Callable[[np.ndarray, Any], np.ndarray]

_LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianDensity(BaseModel):
    """Product Gaussian with diagonal standard deviations.

    ``log_prob`` is written with :mod:`tkrnet._diff.ops` arithmetic so it can be
    evaluated on plain arrays, recorded variables and tangent bundles alike.
    """

    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "frozen": True}

    mean: FloatArray = Field(description="Mean vector, shape (d,)")
    std: FloatArray = Field(
        description="Per-coordinate standard deviations, shape (d,)"
    )

    @model_validator(mode="before")
    @classmethod
    def _broadcast_scalar_std(cls, data: Any) -> Any:
        if isinstance(data, dict) and "std" in data and "mean" in data:
            if np.ndim(data["std"]) == 0:
                shape = np.shape(data["mean"])
                data = {**data, "std": np.full(shape, float(data["std"]))}
        return data

    @model_validator(mode="after")
    def _validate_shapes(self) -> Self:
        if self.mean.ndim != 1 or self.mean.size == 0:
            raise ValueError(f"mean must be a non-empty vector, got {self.mean.shape}")
        if self.std.shape != self.mean.shape:
            raise ValueError(
                f"std has shape {self.std.shape}, expected {self.mean.shape}"
            )
        if np.any(self.std <= 0):
            raise ValueError("std must be positive")
        return self

    @classmethod
    def isotropic(cls, mean: Any, std: float) -> GaussianDensity:
        """Gaussian with the same standard deviation in every coordinate."""
        m = np.asarray(mean, dtype=np.float64)
        return cls(mean=m, std=np.full(m.shape, std))

    @classmethod
    def product(cls, *parts: GaussianDensity) -> GaussianDensity:
        """Joint density of independent blocks, concatenated in order."""
        return cls(
            mean=np.concatenate([p.mean for p in parts]),
            std=np.concatenate([p.std for p in parts]),
        )

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def log_prob(self, x: Any) -> Any:
        """Log-density of each row of ``x`` (shape ``(..., d)``)."""
        z = (x - self.mean) / self.std
        norm = float(np.sum(np.log(self.std))) + 0.5 * self.dim * _LOG_2PI
        return -0.5 * (z * z).sum(axis=-1) - norm

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.dim))


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A benchmark system ``dx/dt = f(x, t)`` with random initial state.

    ``velocity`` accepts ``x`` of shape ``(B, d)`` and ``t`` either scalar or
    ``(B, 1)``, and is composed of differentiable elementary operations.
    ``divergence`` is the analytic ``div_x f`` evaluated on plain arrays.
    """

    name: str
    dim: int
    velocity: VectorField
    divergence: Divergence
    initial: GaussianDensity
    box_low: np.ndarray
    box_high: np.ndarray
    t_final: float

    def __post_init__(self) -> None:
        if self.initial.dim != self.dim:
            raise DomainError(
                f"initial density has dimension {self.initial.dim}, "
                f"system has {self.dim}"
            )
        if self.box_low.shape != (self.dim,) or self.box_high.shape != (self.dim,):
            raise DomainError(f"collocation box must have {self.dim} coordinates")

    @property
    def init_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.box_low, self.box_high

    def f(self, x: Any, t: Any) -> Any:
        return self.velocity(x, t)

    def div_f(self, x: Any, t: Any) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.broadcast_to(self.divergence(xa, t), xa.shape[:-1]).copy()

    def log_p0(self, x: Any) -> Any:
        return self.initial.log_prob(x)

    def sample_p0(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.initial.sample(n, rng)


def augment(
    field: Callable[[Any, Any, Any], Any],
    divergence: Callable[[np.ndarray, np.ndarray, Any], np.ndarray],
    state_density: GaussianDensity,
    param_density: GaussianDensity,
    *,
    name: str,
    box: tuple[float, float],
    t_final: float,
) -> SystemSpec:
    """Lift ``dy/dt = g(y, xi, t)`` with random parameters ``xi`` to ``x = [y, xi]``.

    The parameter block has zero velocity, so the augmented field is
    ``[g; 0]`` and the initial density factorizes as ``p_y(y, 0) p_xi(xi)``.

    Parameters
    ----------
    field : callable
        ``g(y, xi, t)`` returning ``(B, n)``.
    divergence : callable
        Analytic ``div_y g(y, xi, t)`` on plain arrays, shape ``(B,)``.
    state_density, param_density : GaussianDensity
        Initial density of ``y`` and density of ``xi``.
    name : str
        System name.
    box : tuple of float
        Bounds used in every coordinate of the initial collocation box.
    t_final : float
        Final time.
    """
    n, m = state_density.dim, param_density.dim
    probe = np.asarray(field(np.zeros((1, n)), np.zeros((1, m)), 0.0))
    if probe.shape != (1, n):
        raise DomainError(
            f"field returned shape {probe.shape[1:]} for a {n}-dimensional state"
        )

    def velocity(x: Any, t: Any) -> Any:
        g = field(x[..., :n], x[..., n:], t)
        zeros = np.zeros((*ops.primal(x).shape[:-1], m))
        return ops.concat([g, zeros], axis=-1)

    def div(x: np.ndarray, t: Any) -> np.ndarray:
        return divergence(x[..., :n], x[..., n:], t)

    d = n + m
    return SystemSpec(
        name=name,
        dim=d,
        velocity=velocity,
        divergence=div,
        initial=GaussianDensity.product(state_density, param_density),
        box_low=np.full(d, box[0], dtype=np.float64),
        box_high=np.full(d, box[1], dtype=np.float64),
        t_final=t_final,
    )


class BaseSystemConfig(BaseModel):
    """Base class for benchmark system configurations."""

    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "validate_assignment": True}

    t_final: PositiveFloat = Field(description="Final time T of the simulation")

    def build(self) -> SystemSpec:  # pragma: no cover
        raise NotImplementedError()
