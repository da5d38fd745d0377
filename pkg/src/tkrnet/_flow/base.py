"""Shared plumbing for flow layers."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Any, NamedTuple

import numpy as np

from tkrnet._diff import ParameterStore, ops

__all__ = ["FlowLayer", "LayerTime", "Params", "join_active", "split_active"]

Params = Mapping[str, Any]


class LayerTime(NamedTuple):
    """Time inputs seen by every layer for one batch.

    Attributes
    ----------
    tau : tensor, shape (B, 1)
        Time measured from the model's origin.
    ratio : tensor, shape (B, 1)
        ``tau / horizon``, the coupling prefactor.
    features : tensor, shape (B, 1) or (B, 2)
        Time columns appended to the coupling network input.
    """

    tau: Any
    ratio: Any
    features: Any


def split_active(x: Any, n: int, dim: int) -> tuple[Any, Any | None]:
    """Split ``x`` into its first ``n`` (active) coordinates and the frozen rest."""
    if n == dim:
        return x, None
    return x[..., :n], x[..., n:]


def join_active(y: Any, rest: Any | None) -> Any:
    if rest is None:
        return y
    return ops.concat([y, rest], axis=-1)


class FlowLayer:
    """A time-dependent invertible map acting on the first ``active`` coordinates.

    Subclasses register their parameters in :meth:`init_params` under
    ``prefix`` and implement :meth:`forward` / :meth:`inverse` against a
    mapping of parameter tensors (arrays, recorded variables or bundles).
    """

    def __init__(self, prefix: str, active: int, dim: int) -> None:
        self.prefix = prefix
        self.active = active
        self.dim = dim

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.prefix!r}, active={self.active})"

    def key(self, name: str) -> str:
        return f"{self.prefix}.{name}"

    def init_params(
        self, store: ParameterStore, rng: np.random.Generator
    ) -> None:  # pragma: no cover
        raise NotImplementedError()

    def forward(
        self, p: Params, x: Any, time: LayerTime
    ) -> tuple[Any, Any]:  # pragma: no cover
        raise NotImplementedError()

    def inverse(self, p: Params, y: Any, time: LayerTime) -> Any:  # pragma: no cover
        raise NotImplementedError()
