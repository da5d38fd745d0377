"""Adaptive physics-informed training of time-dependent flows."""

from .collocation import (
    CollocationSet,
    SeedStreams,
    init_collocation,
    make_time_grid,
    resample_collocation,
)
from .config import (
    Choice1Decomposition,
    Choice2Decomposition,
    DecompositionConfig,
    NoDecomposition,
    TimeGridConfig,
    TrainConfig,
    TrainingConfig,
)
from .drivers import (
    stacked_sample,
    train,
    train_adaptive,
    train_temporal_choice1,
    train_temporal_choice2,
)
from .loop import (
    IterationCallback,
    TrainingEvent,
    TrainingLog,
    TrainingResult,
    TrainingRow,
    run_epochs,
)
from .optim import AdamWState, CosineSchedule, adamw_step, cosine_lr

__all__ = [
    "AdamWState",
    "Choice1Decomposition",
    "Choice2Decomposition",
    "CollocationSet",
    "CosineSchedule",
    "DecompositionConfig",
    "IterationCallback",
    "NoDecomposition",
    "SeedStreams",
    "TimeGridConfig",
    "TrainConfig",
    "TrainingConfig",
    "TrainingEvent",
    "TrainingLog",
    "TrainingResult",
    "TrainingRow",
    "adamw_step",
    "cosine_lr",
    "init_collocation",
    "make_time_grid",
    "resample_collocation",
    "run_epochs",
    "stacked_sample",
    "train",
    "train_adaptive",
    "train_temporal_choice1",
    "train_temporal_choice2",
]
