"""Densities assembled from per-interval models."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

import numpy as np

from tkrnet._diff import TangentBundle, Var, ops
from tkrnet._errors import DomainError
from tkrnet._flow.base import Params
from tkrnet._flow.model import FixedTimePrior, TKRnetModel

__all__ = ["PiecewiseModel", "StackedModel", "interval_index"]

_TIME_TOL = 1e-12


def interval_index(breakpoints: np.ndarray, t: Any) -> np.ndarray:
    """Index ``i`` of the interval ``(T_i, T_{i+1}]`` holding each time.

    The left end ``T_0`` belongs to the first interval.
    """
    ta = np.asarray(t, dtype=np.float64)
    lo, hi = breakpoints[0], breakpoints[-1]
    if np.any(ta < lo - _TIME_TOL) or np.any(ta > hi + _TIME_TOL):
        raise DomainError(f"time outside [{lo}, {hi}]")
    idx = np.searchsorted(breakpoints, ta - _TIME_TOL, side="left") - 1
    return np.clip(idx, 0, len(breakpoints) - 2)


class PiecewiseModel:
    """Dispatch each time to the model that owns its sub-interval.

    Parameters
    ----------
    models : sequence of TKRnetModel
        One model per sub-interval, in time order.
    breakpoints : sequence of float
        ``T_0 < T_1 < ... < T_n`` with ``n == len(models)``.
    """

    def __init__(self, models: Sequence[TKRnetModel], breakpoints: Sequence[float]):
        bp = np.asarray(breakpoints, dtype=np.float64)
        if len(models) == 0 or bp.shape != (len(models) + 1,):
            raise DomainError(
                f"{len(models)} models need {len(models) + 1} breakpoints, "
                f"got {bp.size}"
            )
        if np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        dims = {m.dim for m in models}
        if len(dims) != 1:
            raise DomainError(f"interval models disagree on dimension: {dims}")
        self.models = list(models)
        self.breakpoints = bp

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(intervals={len(self.models)}, "
            f"breakpoints={self.breakpoints.tolist()})"
        )

    def __len__(self) -> int:
        return len(self.models)

    @property
    def dim(self) -> int:
        return self.models[0].dim

    @property
    def t_end(self) -> float:
        return float(self.breakpoints[-1])

    def model_at(self, t: float) -> TKRnetModel:
        return self.models[int(interval_index(self.breakpoints, t))]

    def log_density(self, x: Any, t: Any, params: Params | None = None) -> Any:
        """Log-density of each row of ``x`` under its interval's model."""
        if params is not None:
            raise ValueError(f"{type(self).__name__} evaluates stored parameters only")
        if isinstance(t, TangentBundle | Var) or isinstance(x, TangentBundle | Var):
            idx = np.unique(interval_index(self.breakpoints, ops.primal(t)))
            if idx.size != 1:
                raise DomainError("differentiable evaluation must stay in one interval")
            return self.models[int(idx[0])].log_density(x, t)
        xa = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ta = np.broadcast_to(np.asarray(t, dtype=np.float64).ravel(), (xa.shape[0],))
        owner = interval_index(self.breakpoints, ta)
        out = np.empty(xa.shape[0])
        for i in np.unique(owner):
            rows = owner == i
            out[rows] = self.models[int(i)].log_density(xa[rows], ta[rows])
        if np.ndim(x) == 1:
            return out[0]
        return out

    def sample(self, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.model_at(t).sample(t, n, rng)


class StackedModel(PiecewiseModel):
    """Interval models whose priors chain through the previous interval.

    Model ``i`` uses the stacked density at ``T_i`` as its prior, so sampling
    at time ``t`` draws from the initial density and pushes the draws through
    every earlier local map at its right end point before the local inverse at
    ``t``.
    """

    def __init__(self, models: Sequence[TKRnetModel], breakpoints: Sequence[float]):
        super().__init__(models, breakpoints)
        for i, model in enumerate(self.models):
            if abs(model.t_origin - self.breakpoints[i]) > _TIME_TOL or (
                abs(model.t_end - self.breakpoints[i + 1]) > _TIME_TOL
            ):
                raise DomainError(
                    f"interval model {i} covers [{model.t_origin}, {model.t_end}], "
                    f"expected [{self.breakpoints[i]}, {self.breakpoints[i + 1]}]"
                )
            if i and not isinstance(model.prior, FixedTimePrior):
                raise DomainError(f"interval model {i} must use the previous stack")

    def prefix(self, count: int) -> StackedModel:
        """The stack of the first ``count`` intervals."""
        return StackedModel(self.models[:count], self.breakpoints[: count + 1])
