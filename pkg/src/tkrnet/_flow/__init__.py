"""Time-dependent KRnet layers, composition and checkpoints."""

from .base import FlowLayer, LayerTime
from .checkpoint import (
    Checkpoint,
    GaussianPriorSpec,
    ModelCheckpoint,
    PiecewiseCheckpoint,
    PreviousIntervalPrior,
    dump_checkpoint,
    load_checkpoint,
    read_checkpoint,
    restore_model,
    save_checkpoint,
)
from .composite import PiecewiseModel, StackedModel, interval_index
from .config import ArchitectureConfig, partition_sizes
from .coupling import AffineCouplingLayer, CouplingNet
from .model import DensityModel, FixedTimePrior, Prior, TKRnetModel, build_model
from .nonlinear import NonlinearLayer
from .scale_bias import ScaleBiasLayer

__all__ = [
    "AffineCouplingLayer",
    "ArchitectureConfig",
    "Checkpoint",
    "CouplingNet",
    "DensityModel",
    "FixedTimePrior",
    "FlowLayer",
    "GaussianPriorSpec",
    "LayerTime",
    "ModelCheckpoint",
    "NonlinearLayer",
    "PiecewiseCheckpoint",
    "PiecewiseModel",
    "PreviousIntervalPrior",
    "Prior",
    "ScaleBiasLayer",
    "StackedModel",
    "TKRnetModel",
    "build_model",
    "dump_checkpoint",
    "interval_index",
    "load_checkpoint",
    "partition_sizes",
    "read_checkpoint",
    "restore_model",
    "save_checkpoint",
]
