"""Epoch loop shared by every training driver."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from tkrnet._csv import write_rows
from tkrnet._diff import BoundParameters, nested_gradient
from tkrnet._errors import EvaluationError, FlowError, TrainingError
from tkrnet._flow import DensityModel, TKRnetModel
from tkrnet._train.collocation import CollocationSet
from tkrnet._train.config import TrainingConfig
from tkrnet._train.optim import AdamWState, CosineSchedule, adamw_step, cosine_lr

__all__ = [
    "IterationCallback",
    "TrainingEvent",
    "TrainingLog",
    "TrainingResult",
    "TrainingRow",
    "run_epochs",
]

logger = logging.getLogger(__name__)

Objective = Callable[[BoundParameters, np.ndarray, np.ndarray, int], Any]


class TrainingRow(BaseModel):
    """One optimization step, as written to ``metrics.csv``."""

    interval: int | None = None
    adapt_iter: int
    epoch: int
    batch: int
    loss: float
    lr: float


@dataclass
class TrainingLog:
    """Per-step losses and learning rates of a training run."""

    rows: list[TrainingRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def record(self, **values: Any) -> None:
        self.rows.append(TrainingRow(**values))

    def losses(self, adapt_iter: int | None = None) -> np.ndarray:
        return np.array(
            [r.loss for r in self.rows if adapt_iter in (None, r.adapt_iter)]
        )

    def write(self, path: str | Path) -> Path:
        """Write ``metrics.csv``; the interval column only for decomposed runs."""
        decomposed = any(r.interval is not None for r in self.rows)
        exclude = () if decomposed else ("interval",)
        return write_rows(path, TrainingRow, self.rows, exclude=exclude)


@dataclass(frozen=True, eq=False)
class TrainingEvent:
    """State handed to the callback after each adaptivity iteration.

    ``model`` is the flow that was just optimized; ``composite`` is the
    density over ``[0, t_end]`` assembled from every interval trained so far.
    """

    interval: int | None
    adapt_iter: int
    model: TKRnetModel
    composite: DensityModel
    t_end: float


IterationCallback = Callable[[TrainingEvent], None]


@dataclass(frozen=True, eq=False)
class TrainingResult:
    model: DensityModel
    log: TrainingLog


def run_epochs(
    model: TKRnetModel,
    objective: Objective,
    collocation: CollocationSet,
    config: TrainingConfig,
    rng: np.random.Generator,
    log: TrainingLog,
    *,
    adapt_iter: int,
    interval: int | None = None,
) -> None:
    """Optimize ``model`` in place for ``config.epochs`` epochs.

    A fresh AdamW state and cosine schedule spanning ``epochs * batches``
    steps are used.  ``objective(params, x, t, batch)`` returns the recorded
    scalar loss of one mini-batch.
    """
    store = model.store
    state = AdamWState.zeros(
        store.size,
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    schedule = CosineSchedule(
        eta_max=config.learning_rate,
        eta_min=config.min_learning_rate,
        total_steps=config.epochs * config.batches,
    )
    step = 0
    for epoch in range(config.epochs):
        epoch_losses = []
        for b, idx in enumerate(collocation.batches(rng)):
            lr = cosine_lr(schedule, step)
            xb, tb = collocation.x[idx], collocation.t[idx]
            where = {"adapt_iter": adapt_iter, "epoch": epoch, "batch": b}
            try:
                value, grad = nested_gradient(
                    lambda p, xb=xb, tb=tb, b=b: objective(p, xb, tb, b), store
                )
            except TrainingError as e:
                raise TrainingError(e.message, segment=e.segment, **where) from e
            except (EvaluationError, FlowError) as e:
                raise TrainingError(str(e), **where) from e
            theta, state = adamw_step(state, store.vector, grad, lr)
            store.load_vector(theta)
            log.record(interval=interval, loss=value, lr=lr, **where)
            epoch_losses.append(value)
            logger.debug(
                "iter %d epoch %d batch %d: loss %.6e", adapt_iter, epoch, b, value
            )
            step += 1
        logger.info(
            "%siter %d epoch %d: mean loss %.6e",
            "" if interval is None else f"interval {interval} ",
            adapt_iter,
            epoch,
            float(np.mean(epoch_losses)),
        )
