"""Space-time collocation points and their mini-batch partition."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from tkrnet._errors import DomainError
from tkrnet._flow import TKRnetModel

__all__ = [
    "CollocationSet",
    "SeedStreams",
    "init_collocation",
    "make_time_grid",
    "resample_collocation",
]

logger = logging.getLogger(__name__)


def make_time_grid(
    t_final: float, steps: int, points: int, t_start: float = 0.0
) -> np.ndarray:
    """Time stamps ``t_start + ceil(i / points) * dt`` for ``i = 1 .. points*steps``.

    ``dt = (t_final - t_start) / steps``, so the stamps lie in
    ``(t_start, t_final]`` and the last one equals ``t_final`` exactly.

    Examples
    --------
    >>> make_time_grid(1.0, 2, 2)
    array([0.5, 0.5, 1. , 1. ])
    """
    if steps <= 0 or points <= 0:
        raise DomainError("steps and points must be positive")
    if t_final <= t_start:
        raise DomainError(f"empty time interval ({t_start}, {t_final}]")
    stamps = np.linspace(t_start, t_final, steps + 1)[1:]
    return np.repeat(stamps, points)


@dataclass(frozen=True, eq=False)
class CollocationSet:
    """Collocation points ``(x_i, t_i)`` of one adaptivity iteration.

    Attributes
    ----------
    x : ndarray, shape (N_r, d)
    t : ndarray, shape (N_r,)
    adapt_iter : int
        Adaptivity iteration that produced the points.
    num_batches : int
        Number of mini-batches ``N_b`` each epoch is split into.
    """

    x: np.ndarray
    t: np.ndarray
    adapt_iter: int = 0
    num_batches: int = 1

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.t.shape != (self.x.shape[0],):
            raise DomainError(
                f"points {self.x.shape} and times {self.t.shape} do not pair up"
            )
        if not 1 <= self.num_batches <= len(self):
            raise DomainError(
                f"cannot split {len(self)} points into {self.num_batches} batches"
            )

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    def batches(self, rng: np.random.Generator) -> list[np.ndarray]:
        """Shuffle and split the point indices into ``num_batches`` parts."""
        return np.array_split(rng.permutation(len(self)), self.num_batches)


def init_collocation(
    box: tuple[Any, Any],
    times: np.ndarray,
    rng: np.random.Generator,
    *,
    num_batches: int = 1,
) -> CollocationSet:
    """Points drawn uniformly from ``box`` and paired with ``times``."""
    low = np.asarray(box[0], dtype=np.float64)
    high = np.asarray(box[1], dtype=np.float64)
    if low.shape != high.shape or np.any(high <= low):
        raise DomainError("collocation box must have low < high in every coordinate")
    x = low + (high - low) * rng.random((times.size, low.size))
    return CollocationSet(x, np.array(times, dtype=np.float64), 0, num_batches)


def resample_collocation(
    model: TKRnetModel,
    times: np.ndarray,
    rng: np.random.Generator,
    *,
    num_batches: int = 1,
    adapt_iter: int = 0,
) -> CollocationSet:
    """Draw ``x_i ~ p(., t_i)`` from ``model`` at every time stamp.

    Each point is ``T^{-1}(z_i, t_i)`` with ``z_i`` drawn from the model's
    prior, so stamps at the model's origin reproduce exact prior draws.
    """
    t = np.array(times, dtype=np.float64)
    z = model.prior.sample(t.size, rng)
    x = np.asarray(model.inverse(z, t))
    logger.info("resampled %d collocation points from %r", t.size, model)
    return CollocationSet(x, t, adapt_iter, num_batches)


class SeedStreams:
    """Independent random generators spawned from one root seed.

    The streams are ``init`` (parameter initialization), ``collocation``
    (initial points and batch shuffling), ``resampling`` (adaptive and
    interface draws) and ``evaluation`` (reference ensembles, model samples).
    """

    names = ("init", "collocation", "resampling", "evaluation")

    def __init__(self, seed: int) -> None:
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(len(self.names))
        self._rngs = {
            name: np.random.default_rng(child)
            for name, child in zip(self.names, children)
        }

    def __repr__(self) -> str:
        return f"SeedStreams(seed={self.seed})"

    def __getitem__(self, name: str) -> np.random.Generator:
        return self._rngs[name]

    @property
    def init(self) -> np.random.Generator:
        return self._rngs["init"]

    @property
    def collocation(self) -> np.random.Generator:
        return self._rngs["collocation"]

    @property
    def resampling(self) -> np.random.Generator:
        return self._rngs["resampling"]

    @property
    def evaluation(self) -> np.random.Generator:
        return self._rngs["evaluation"]
