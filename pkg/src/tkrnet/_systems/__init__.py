"""Benchmark stochastic dynamical systems."""

from typing import Annotated, Any, TypeAlias

from pydantic import BeforeValidator, Field, TypeAdapter

from .base import BaseSystemConfig, GaussianDensity, SystemSpec, augment
from .double_gyre import DoubleGyreConfig, double_gyre
from .duffing import DuffingConfig, duffing
from .kraichnan_orszag import KraichnanOrszagConfig, kraichnan_orszag
from .lorenz96 import Lorenz96Config, lorenz96, lorenz96_initial_mean

__all__ = [
    "BaseSystemConfig",
    "DoubleGyreConfig",
    "DuffingConfig",
    "GaussianDensity",
    "KraichnanOrszagConfig",
    "Lorenz96Config",
    "SystemConfig",
    "SystemSpec",
    "augment",
    "double_gyre",
    "duffing",
    "get_system",
    "kraichnan_orszag",
    "lorenz96",
    "lorenz96_initial_mean",
]


def _str_to_system(value: Any) -> Any:
    """Allow a bare system name in place of a full configuration."""
    if isinstance(value, str):
        return {"name": value}
    return value


SystemConfig: TypeAlias = Annotated[
    DoubleGyreConfig | DuffingConfig | KraichnanOrszagConfig | Lorenz96Config,
    Field(discriminator="name"),
    BeforeValidator(_str_to_system),
]


def get_system(config: BaseSystemConfig | str | dict) -> SystemSpec:
    """Build the :class:`SystemSpec` described by ``config``.

    Parameters
    ----------
    config : BaseSystemConfig, str or dict
        A validated system configuration, a system name, or a mapping with a
        ``name`` key plus overrides.
    """
    if not isinstance(config, BaseSystemConfig):
        config = TypeAdapter[BaseSystemConfig](SystemConfig).validate_python(config)
    return config.build()
