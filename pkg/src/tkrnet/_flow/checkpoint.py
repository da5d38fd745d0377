"""JSON checkpoints of trained models."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated, Any, ClassVar, Literal, TypeAlias

import numpy as np
from pydantic import ConfigDict, BaseModel, Field, TypeAdapter, ValidationError

from tkrnet._errors import CheckpointError
from tkrnet._flow.composite import PiecewiseModel, StackedModel
from tkrnet._flow.config import ArchitectureConfig
from tkrnet._flow.model import FixedTimePrior, TKRnetModel
from tkrnet._systems import GaussianDensity, SystemConfig
from tkrnet._types import FloatArray

__all__ = [
    "Checkpoint",
    "GaussianPriorSpec",
    "ModelCheckpoint",
    "PiecewiseCheckpoint",
    "PreviousIntervalPrior",
    "dump_checkpoint",
    "load_checkpoint",
    "read_checkpoint",
    "restore_model",
    "save_checkpoint",
]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

AnyModel: TypeAlias = "TKRnetModel | PiecewiseModel"


class _Base(BaseModel):
    model_config: ClassVar[ConfigDict] = {"extra": "forbid"}


class GaussianPriorSpec(_Base):
    """The flow's reference density is a fixed product Gaussian."""

    kind: Literal["gaussian"] = "gaussian"
    mean: FloatArray
    std: FloatArray


class PreviousIntervalPrior(_Base):
    """The reference density is the preceding intervals' stack at time ``t``."""

    kind: Literal["previous_interval"] = "previous_interval"
    t: float


PriorSpec: TypeAlias = Annotated[
    GaussianPriorSpec | PreviousIntervalPrior, Field(discriminator="kind")
]


class SegmentSpec(_Base):
    name: str
    shape: list[int]


class ModelCheckpoint(_Base):
    """A single flow: structure, interval, prior, and every parameter value."""

    kind: Literal["model"] = "model"
    format_version: Literal[1] = FORMAT_VERSION
    architecture: ArchitectureConfig
    dim: int = Field(gt=0)
    seed: int | None = Field(default=None, description="Root seed of the run")
    system: SystemConfig | None = Field(
        default=None, description="System the model was trained for"
    )
    t_origin: float
    horizon: float = Field(gt=0)
    time_feature: bool = False
    prior: PriorSpec
    segments: list[SegmentSpec]
    parameters: FloatArray
    buffers: dict[str, FloatArray]


class PiecewiseCheckpoint(_Base):
    """Per-interval flows of a temporal decomposition."""

    kind: Literal["piecewise"] = "piecewise"
    format_version: Literal[1] = FORMAT_VERSION
    seed: int | None = None
    system: SystemConfig | None = None
    breakpoints: list[float]
    models: list[ModelCheckpoint] = Field(min_length=1)


Checkpoint: TypeAlias = Annotated[
    ModelCheckpoint | PiecewiseCheckpoint, Field(discriminator="kind")
]


def _prior_spec(model: TKRnetModel) -> GaussianPriorSpec | PreviousIntervalPrior:
    prior = model.prior
    if isinstance(prior, GaussianDensity):
        return GaussianPriorSpec(mean=prior.mean, std=prior.std)
    if isinstance(prior, FixedTimePrior):
        return PreviousIntervalPrior(t=prior.t)
    raise CheckpointError(f"cannot serialize prior of type {type(prior).__name__}")


def _model_checkpoint(
    model: TKRnetModel, seed: int | None, system: Any
) -> ModelCheckpoint:
    store = model.store
    return ModelCheckpoint(
        architecture=model.arch,
        dim=model.dim,
        seed=seed,
        system=system,
        t_origin=model.t_origin,
        horizon=model.horizon,
        time_feature=model.time_feature,
        prior=_prior_spec(model),
        segments=[
            SegmentSpec(name=s.name, shape=list(s.shape)) for s in store.segments
        ],
        parameters=store.vector.copy(),
        buffers=store.buffers,
    )


def dump_checkpoint(
    model: AnyModel, *, seed: int | None = None, system: Any = None
) -> ModelCheckpoint | PiecewiseCheckpoint:
    """Describe ``model`` as a checkpoint document."""
    if isinstance(model, PiecewiseModel):
        return PiecewiseCheckpoint(
            seed=seed,
            system=system,
            breakpoints=model.breakpoints.tolist(),
            models=[_model_checkpoint(m, seed, None) for m in model.models],
        )
    return _model_checkpoint(model, seed, system)


def _restore_single(ckpt: ModelCheckpoint, prior: Any) -> TKRnetModel:
    model = TKRnetModel(
        ckpt.architecture,
        ckpt.dim,
        prior,
        t_origin=ckpt.t_origin,
        horizon=ckpt.horizon,
        time_feature=ckpt.time_feature,
    )
    # structure first, with throwaway values, then overwrite everything
    model.init_params(np.random.default_rng(0))
    layout = [(s.name, list(s.shape)) for s in model.store.segments]
    if layout != [(s.name, s.shape) for s in ckpt.segments]:
        raise CheckpointError("parameter layout does not match the architecture")
    try:
        model.store.load_vector(ckpt.parameters)
        model.store.load_buffers(ckpt.buffers)
    except (KeyError, ValueError) as e:
        raise CheckpointError(str(e)) from e
    if set(ckpt.buffers) != set(model.store.buffers):
        raise CheckpointError("checkpoint buffers do not match the architecture")
    return model


def restore_model(ckpt: ModelCheckpoint | PiecewiseCheckpoint) -> AnyModel:
    """Rebuild the model a checkpoint document describes."""
    if isinstance(ckpt, ModelCheckpoint):
        if not isinstance(ckpt.prior, GaussianPriorSpec):
            raise CheckpointError("a single model checkpoint needs a Gaussian prior")
        prior = GaussianDensity(mean=ckpt.prior.mean, std=ckpt.prior.std)
        return _restore_single(ckpt, prior)

    models: list[TKRnetModel] = []
    stacked = any(isinstance(m.prior, PreviousIntervalPrior) for m in ckpt.models)
    for i, item in enumerate(ckpt.models):
        if isinstance(item.prior, GaussianPriorSpec):
            if stacked and i:
                raise CheckpointError(f"interval {i} must chain to the previous stack")
            prior: Any = GaussianDensity(mean=item.prior.mean, std=item.prior.std)
        else:
            if i == 0:
                raise CheckpointError("the first interval needs a Gaussian prior")
            previous = StackedModel(models, ckpt.breakpoints[: i + 1])
            prior = FixedTimePrior(previous, item.prior.t)
        models.append(_restore_single(item, prior))
    cls = StackedModel if stacked else PiecewiseModel
    return cls(models, ckpt.breakpoints)


def save_checkpoint(
    model: AnyModel, path: str | Path, *, seed: int | None = None, system: Any = None
) -> Path:
    """Write ``model`` to ``path`` as a JSON document."""
    path = Path(path)
    doc = dump_checkpoint(model, seed=seed, system=system)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(doc.model_dump_json(indent=1))
    logger.info("wrote checkpoint %s", path)
    return path


def read_checkpoint(path: str | Path) -> ModelCheckpoint | PiecewiseCheckpoint:
    """Parse a checkpoint document without rebuilding the model."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    try:
        checkpoint: Checkpoint = TypeAdapter[Any](Checkpoint).validate_json(text)
        return checkpoint
    except ValidationError as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e


def load_checkpoint(path: str | Path) -> AnyModel:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    return restore_model(read_checkpoint(path))
