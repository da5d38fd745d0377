"""Configuration sections consumed by the training drivers."""

from __future__ import annotations

from typing import Annotated, ClassVar, Literal, TypeAlias

import numpy as np
from annotated_types import Interval
from pydantic import (
    ConfigDict,
    BaseModel,
    BeforeValidator,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    model_validator,
)
from typing_extensions import Self

from tkrnet._flow import ArchitectureConfig
from tkrnet._types import LossVariant

__all__ = [
    "Choice1Decomposition",
    "Choice2Decomposition",
    "DecompositionConfig",
    "NoDecomposition",
    "TimeGridConfig",
    "TrainConfig",
    "TrainingConfig",
]

Beta = Annotated[float, Interval(ge=0, lt=1)]


class _Section(BaseModel):
    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "validate_assignment": True}


class TrainingConfig(_Section):
    """Optimization loop settings."""

    epochs: PositiveInt = Field(
        default=20, description="Epochs per adaptivity iteration"
    )
    adaptive_iterations: PositiveInt = Field(
        default=3, description="Number of adaptivity iterations"
    )
    batches: PositiveInt = Field(default=1, description="Mini-batches per epoch")
    learning_rate: PositiveFloat = Field(default=1e-3, description="Initial step size")
    min_learning_rate: NonNegativeFloat = Field(
        default=0.0, description="Learning rate at the end of the cosine schedule"
    )
    weight_decay: NonNegativeFloat = Field(
        default=0.01, description="Decoupled AdamW weight decay"
    )
    betas: tuple[Beta, Beta] = Field(
        default=(0.9, 0.999), description="AdamW moment decay rates"
    )
    eps: PositiveFloat = Field(default=1e-8, description="AdamW denominator offset")
    loss: LossVariant = Field(default=LossVariant.LOG, description="Residual variant")
    interface_weight: NonNegativeFloat = Field(
        default=1.0, description="Weight of the interface cross-entropy term"
    )
    interface_samples: PositiveInt | None = Field(
        default=None,
        description="Interface samples per adaptivity iteration; defaults to N_r",
    )

    @model_validator(mode="after")
    def _check_schedule(self) -> Self:
        if self.min_learning_rate > self.learning_rate:
            raise ValueError("min_learning_rate cannot exceed learning_rate")
        return self


class TimeGridConfig(_Section):
    """Collocation time grid: ``steps`` stamps with ``points`` locations each."""

    steps: PositiveInt = Field(description="Number of time stamps J per interval")
    points: PositiveInt = Field(description="Spatial points M per time stamp")
    t_final: PositiveFloat | None = Field(
        default=None, description="Final time; defaults to the system's"
    )

    @property
    def size(self) -> int:
        """Collocation points per interval, ``N_r = M * J``."""
        return self.steps * self.points


class NoDecomposition(_Section):
    kind: Literal["none"] = "none"

    def resolve(self, t_final: float) -> np.ndarray:
        return np.array([0.0, t_final])


class _Intervals(_Section):
    intervals: PositiveInt = Field(default=1, description="Number of sub-intervals")
    breakpoints: list[float] | None = Field(
        default=None,
        description="Explicit end points T_0=0 < T_1 < ... < T_n = T",
    )

    @model_validator(mode="after")
    def _check_breakpoints(self) -> Self:
        bp = self.breakpoints
        if bp is not None:
            if len(bp) != self.intervals + 1:
                raise ValueError(
                    f"{self.intervals} intervals need {self.intervals + 1} "
                    f"breakpoints, got {len(bp)}"
                )
            if bp[0] != 0.0 or any(b <= a for a, b in zip(bp, bp[1:])):
                raise ValueError("breakpoints must start at 0 and increase")
        return self

    def resolve(self, t_final: float) -> np.ndarray:
        """End points of the sub-intervals for a run ending at ``t_final``."""
        if self.breakpoints is None:
            return np.linspace(0.0, t_final, self.intervals + 1)
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        if abs(bp[-1] - t_final) > 1e-12:
            raise ValueError(f"last breakpoint {bp[-1]} differs from T={t_final}")
        return bp


class Choice1Decomposition(_Intervals):
    """Sub-interval models on the global time axis, glued by cross-entropy."""

    kind: Literal["choice1"] = "choice1"


class Choice2Decomposition(_Intervals):
    """Local flows stacked on the previous interval's density."""

    kind: Literal["choice2"] = "choice2"
    loss: LossVariant = Field(
        default=LossVariant.PLAIN, description="Residual variant on every interval"
    )
    nonlinear: bool = Field(
        default=False, description="Keep the nonlinear layer in the local flows"
    )


def _str_to_decomposition(value: object) -> object:
    if isinstance(value, str):
        return {"kind": value}
    return value


DecompositionConfig: TypeAlias = Annotated[
    NoDecomposition | Choice1Decomposition | Choice2Decomposition,
    Field(discriminator="kind"),
    BeforeValidator(_str_to_decomposition),
]


class TrainConfig(_Section):
    """Everything the training drivers need besides the system."""

    seed: int = Field(default=0, description="Root seed of every random stream")
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    time_grid: TimeGridConfig
    decomposition: DecompositionConfig = Field(default_factory=NoDecomposition)
