"""Adaptive training and the two temporal decomposition schemes."""

from __future__ import annotations

import logging
from collections.abc import Callable
from typing import Any

import numpy as np

from tkrnet._diff import BoundParameters
from tkrnet._flow import (
    DensityModel,
    FixedTimePrior,
    PiecewiseModel,
    Prior,
    StackedModel,
    TKRnetModel,
    build_model,
)
from tkrnet._loss import DensityModelView, batch_loss, interface_cross_entropy
from tkrnet._systems import SystemSpec
from tkrnet._train.collocation import (
    CollocationSet,
    SeedStreams,
    init_collocation,
    make_time_grid,
    resample_collocation,
)
from tkrnet._train.config import (
    Choice1Decomposition,
    Choice2Decomposition,
    TrainConfig,
)
from tkrnet._train.loop import (
    IterationCallback,
    TrainingEvent,
    TrainingLog,
    TrainingResult,
    run_epochs,
)
from tkrnet._types import LossVariant

__all__ = [
    "stacked_sample",
    "train",
    "train_adaptive",
    "train_temporal_choice1",
    "train_temporal_choice2",
]

logger = logging.getLogger(__name__)


def _t_final(system: SystemSpec, config: TrainConfig) -> float:
    return config.time_grid.t_final or system.t_final


def _objective(
    model: TKRnetModel,
    system: SystemSpec,
    variant: LossVariant,
    interface: tuple[list[np.ndarray], float, float] | None = None,
) -> Callable[[BoundParameters, np.ndarray, np.ndarray, int], Any]:
    def objective(p: BoundParameters, x: np.ndarray, t: np.ndarray, batch: int) -> Any:
        view = DensityModelView(model, p)
        loss = batch_loss(view, system, x, t, variant)
        if interface is not None:
            parts, t_prev, weight = interface
            loss = loss + weight * interface_cross_entropy(view, parts[batch], t_prev)
        return loss

    return objective


def _fit_interval(
    model: TKRnetModel,
    system: SystemSpec,
    config: TrainConfig,
    seeds: SeedStreams,
    log: TrainingLog,
    *,
    times: np.ndarray,
    collocation: CollocationSet,
    variant: LossVariant,
    interval: int | None = None,
    previous: DensityModel | None = None,
    t_prev: float = 0.0,
    composite: Callable[[TKRnetModel], DensityModel] | None = None,
    callback: IterationCallback | None = None,
) -> None:
    """Adaptivity iterations for one model; ``previous`` adds the interface term."""
    tc = config.training
    for k in range(tc.adaptive_iterations):
        interface = None
        if previous is not None:
            n_int = tc.interface_samples or len(collocation)
            samples = previous.sample(t_prev, n_int, seeds.resampling)
            parts = np.array_split(samples, tc.batches)
            interface = (parts, t_prev, tc.interface_weight)
        objective = _objective(model, system, variant, interface)
        run_epochs(
            model,
            objective,
            collocation,
            tc,
            seeds.collocation,
            log,
            adapt_iter=k,
            interval=interval,
        )
        t_end = float(times.max())
        if callback is not None:
            whole = model if composite is None else composite(model)
            callback(TrainingEvent(interval, k, model, whole, t_end))
        logger.info(
            "%sfinished adaptivity iteration %d/%d",
            "" if interval is None else f"interval {interval}: ",
            k + 1,
            tc.adaptive_iterations,
        )
        if k + 1 < tc.adaptive_iterations:
            collocation = resample_collocation(
                model,
                times,
                seeds.resampling,
                num_batches=tc.batches,
                adapt_iter=k + 1,
            )


def train_adaptive(
    system: SystemSpec,
    config: TrainConfig,
    *,
    seeds: SeedStreams | None = None,
    callback: IterationCallback | None = None,
    log: TrainingLog | None = None,
) -> TrainingResult:
    """Adaptive-sampling physics-informed training on ``[0, T]``.

    Each adaptivity iteration restarts the optimizer and cosine schedule from
    the current (warm) parameters, and every iteration but the last replaces
    the collocation points with draws from the freshly trained density.
    """
    seeds = seeds or SeedStreams(config.seed)
    log = log if log is not None else TrainingLog()
    grid = config.time_grid
    t_final = _t_final(system, config)
    model = build_model(
        config.architecture, system.dim, system.initial, 0.0, t_final, seeds.init
    )
    times = make_time_grid(t_final, grid.steps, grid.points)
    collocation = init_collocation(
        system.init_box, times, seeds.collocation, num_batches=config.training.batches
    )
    logger.info(
        "training %r on %s with %d collocation points",
        model,
        system.name,
        len(collocation),
    )
    _fit_interval(
        model,
        system,
        config,
        seeds,
        log,
        times=times,
        collocation=collocation,
        variant=config.training.loss,
        callback=callback,
    )
    return TrainingResult(model, log)


def train_temporal_choice1(
    system: SystemSpec,
    config: TrainConfig,
    *,
    seeds: SeedStreams | None = None,
    callback: IterationCallback | None = None,
    log: TrainingLog | None = None,
) -> TrainingResult:
    """Train one flow per sub-interval, glued by interface cross-entropy.

    Every interval model lives on the global axis ``[0, T]`` with the initial
    density as its prior.  Interval ``i > 0`` starts from the parameters of
    interval ``i - 1`` and adds ``-mean log p(x_j, T_{i-1})`` over draws
    ``x_j`` of the previous model, redrawn at every adaptivity iteration.
    """
    seeds = seeds or SeedStreams(config.seed)
    log = log if log is not None else TrainingLog()
    dec = config.decomposition
    if not isinstance(dec, Choice1Decomposition):
        dec = Choice1Decomposition()
    grid = config.time_grid
    t_final = _t_final(system, config)
    bps = dec.resolve(t_final)
    models: list[TKRnetModel] = []
    for i in range(len(bps) - 1):
        model = build_model(
            config.architecture, system.dim, system.initial, 0.0, t_final, seeds.init
        )
        times = make_time_grid(bps[i + 1], grid.steps, grid.points, t_start=bps[i])
        previous: TKRnetModel | None = models[-1] if models else None
        if previous is None:
            collocation = init_collocation(
                system.init_box,
                times,
                seeds.collocation,
                num_batches=config.training.batches,
            )
        else:
            model.store = previous.store.copy()
            collocation = resample_collocation(
                model, times, seeds.resampling, num_batches=config.training.batches
            )
        done = list(models)

        def composite(
            m: TKRnetModel, done: list[TKRnetModel] = done, i: int = i
        ) -> DensityModel:
            return PiecewiseModel([*done, m], bps[: i + 2])

        _fit_interval(
            model,
            system,
            config,
            seeds,
            log,
            times=times,
            collocation=collocation,
            variant=config.training.loss,
            interval=i,
            previous=previous,
            t_prev=bps[i],
            composite=composite,
            callback=callback,
        )
        models.append(model)
    return TrainingResult(PiecewiseModel(models, bps), log)


def train_temporal_choice2(
    system: SystemSpec,
    config: TrainConfig,
    *,
    seeds: SeedStreams | None = None,
    callback: IterationCallback | None = None,
    log: TrainingLog | None = None,
) -> TrainingResult:
    """Train local flows whose priors are the stacked density at ``T_{i-1}``.

    The local flow of interval ``i`` sees ``tau = t - T_{i-1}``, scales its
    couplings by ``tau / (T_i - T_{i-1})`` and, for ``i > 0``, receives
    ``T_{i-1}`` as an extra network input.  It is the identity at ``T_{i-1}``,
    so the stacked density is continuous across interfaces.
    """
    seeds = seeds or SeedStreams(config.seed)
    log = log if log is not None else TrainingLog()
    dec = config.decomposition
    if not isinstance(dec, Choice2Decomposition):
        dec = Choice2Decomposition()
    arch = config.architecture.model_copy(update={"nonlinear": dec.nonlinear})
    grid = config.time_grid
    bps = dec.resolve(_t_final(system, config))
    models: list[TKRnetModel] = []
    for i in range(len(bps) - 1):
        prior: Prior = system.initial
        if models:
            prior = FixedTimePrior(StackedModel(models, bps[: i + 1]), bps[i])
        model = build_model(
            arch, system.dim, prior, bps[i], bps[i + 1], seeds.init, time_feature=i > 0
        )
        times = make_time_grid(bps[i + 1], grid.steps, grid.points, t_start=bps[i])
        if models:
            collocation = resample_collocation(
                model, times, seeds.resampling, num_batches=config.training.batches
            )
        else:
            collocation = init_collocation(
                system.init_box,
                times,
                seeds.collocation,
                num_batches=config.training.batches,
            )
        done = list(models)

        def composite(
            m: TKRnetModel, done: list[TKRnetModel] = done, i: int = i
        ) -> DensityModel:
            return StackedModel([*done, m], bps[: i + 2])

        _fit_interval(
            model,
            system,
            config,
            seeds,
            log,
            times=times,
            collocation=collocation,
            variant=dec.loss,
            interval=i,
            composite=composite,
            callback=callback,
        )
        models.append(model)
    return TrainingResult(StackedModel(models, bps), log)


def stacked_sample(
    stack: StackedModel, t: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``n`` points from the stacked density at time ``t``.

    Prior draws pass through every earlier local inverse at its right end point
    and then through the local inverse at ``t``.
    """
    return stack.sample(t, n, rng)


def train(
    system: SystemSpec,
    config: TrainConfig,
    *,
    seeds: SeedStreams | None = None,
    callback: IterationCallback | None = None,
    log: TrainingLog | None = None,
) -> TrainingResult:
    """Dispatch on ``config.decomposition.kind``."""
    kind = config.decomposition.kind
    driver = {
        "none": train_adaptive,
        "choice1": train_temporal_choice1,
        "choice2": train_temporal_choice2,
    }[kind]
    return driver(system, config, seeds=seeds, callback=callback, log=log)
