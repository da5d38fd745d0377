"""Top-level experiment configuration."""

from __future__ import annotations

from pathlib import Path
from typing import ClassVar

import numpy as np
from pydantic import ConfigDict, Field, PositiveInt, model_validator
from typing_extensions import Self

from tkrnet._odeint import IntegratorConfig
from tkrnet._systems import SystemConfig
from tkrnet._train import TrainConfig
from tkrnet._train.config import _Section

__all__ = [
    "EvaluationConfig",
    "ExperimentConfig",
    "GridExportConfig",
    "OutputConfig",
]


class GridExportConfig(_Section):
    """Density grids written as ``density_t{t}.csv``."""

    times: list[float] = Field(
        default_factory=list, description="Times at which to export a grid"
    )
    resolution: PositiveInt = Field(default=101, description="Nodes per axis")
    box: tuple[tuple[float, float], tuple[float, float]] | None = Field(
        default=None,
        description="((low1, low2), (high1, high2)); defaults to the system box",
    )
    axes: tuple[int, int] = Field(default=(0, 1), description="Plotted coordinates")


class EvaluationConfig(_Section):
    """Reference ensemble and metric settings."""

    samples: PositiveInt = Field(
        default=10_000, description="Reference trajectories N_v"
    )
    times: list[float] | None = Field(
        default=None, description="Metric times; defaults to an even grid"
    )
    num_times: PositiveInt = Field(
        default=11, description="Size of the default metric time grid (with t=0)"
    )
    moment_samples: PositiveInt = Field(
        default=10_000, description="Model draws used for moment estimates"
    )
    kl_bound: bool = Field(
        default=True, description="Run the KL time-derivative bound diagnostic"
    )
    chunk_size: PositiveInt = Field(
        default=1000, description="Trajectories per integration chunk"
    )
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    grid: GridExportConfig = Field(default_factory=GridExportConfig)

    @model_validator(mode="after")
    def _check_times(self) -> Self:
        if self.times is not None:
            if any(t < 0 for t in self.times):
                raise ValueError("metric times must be non-negative")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ValueError("metric times must be strictly increasing")
        return self

    def metric_times(self, t_final: float) -> list[float]:
        if self.times is not None:
            return list(self.times)
        times: list[float] = np.linspace(0.0, t_final, self.num_times).tolist()
        return times


class OutputConfig(_Section):
    directory: Path = Field(
        default=Path("runs/tkrnet"), description="Artifact directory of the run"
    )
    checkpoint_every_iteration: bool = Field(
        default=True, description="Write a checkpoint after each adaptivity iteration"
    )


class ExperimentConfig(TrainConfig):
    """A complete, reproducible experiment.

    Examples
    --------
    >>> cfg = ExperimentConfig.model_validate(
    ...     {"system": "double_gyre", "time_grid": {"steps": 10, "points": 20}}
    ... )
    >>> cfg.system.name
    'double_gyre'
    """

    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "validate_assignment": True}

    system: SystemConfig
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check_horizon(self) -> Self:
        t_final = self.t_final
        if self.evaluation.times and self.evaluation.times[-1] > t_final + 1e-12:
            raise ValueError(
                f"metric time {self.evaluation.times[-1]} is beyond T={t_final}"
            )
        late = [t for t in self.evaluation.grid.times if not 0 <= t <= t_final]
        if late:
            raise ValueError(f"density grid times {late} are outside [0, {t_final}]")
        self.decomposition.resolve(t_final)
        return self

    @property
    def t_final(self) -> float:
        return self.time_grid.t_final or self.system.t_final
