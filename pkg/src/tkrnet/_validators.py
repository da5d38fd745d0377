"""Validation entry points for experiment configurations."""

from __future__ import annotations

from collections.abc import Mapping
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import TypeAdapter

if TYPE_CHECKING:
    from tkrnet._config import ExperimentConfig

__all__ = ["load_config", "load_preset", "preset_names", "validate_config"]

_PRESETS = "tkrnet.presets"
# full-scale presets also answer to their "<system>_paper" name
_ALIAS_SUFFIXES = {"_paper": "_full"}


def validate_config(config: Any, strict: bool = False) -> ExperimentConfig:
    """Check an experiment configuration before anything is trained.

    Unknown keys, horizons that disagree with the decomposition breakpoints
    and metric or grid times beyond ``T`` all raise
    :class:`pydantic.ValidationError` naming the offending field.

    Parameters
    ----------
    config : ExperimentConfig, Mapping, str, bytes or Path
        An existing experiment (validated again as a plain mapping, so the
        cross-section checks run on its current state), a mapping of
        sections, a JSON document, or the path of a JSON file.
    strict : bool, default False
        If True, no type coercion is done (``"3"`` is not an epoch count).

    Returns
    -------
    ExperimentConfig
        The resolved experiment, with every default filled in.
    """
    from tkrnet._config import ExperimentConfig

    adapter = TypeAdapter[ExperimentConfig](ExperimentConfig)
    if isinstance(config, ExperimentConfig):
        config = config.model_dump_json()
    elif isinstance(config, Path):
        config = config.read_text()
    if isinstance(config, str | bytes | bytearray):
        return adapter.validate_json(config, strict=strict)
    if not isinstance(config, Mapping):
        raise TypeError(
            f"expected a mapping, JSON text or path, got {type(config).__name__}"
        )
    return adapter.validate_python(dict(config), strict=strict)


def preset_names(aliases: bool = False) -> list[str]:
    """Names of the bundled experiment presets.

    With ``aliases=True`` the alternate names accepted by :func:`load_preset`
    are listed as well.
    """
    files = resources.files(_PRESETS).iterdir()
    names = sorted(p.name[:-5] for p in files if p.name.endswith(".json"))
    if aliases:
        names += sorted(
            name[: -len(target)] + alias
            for alias, target in _ALIAS_SUFFIXES.items()
            for name in names
            if name.endswith(target)
        )
    return names


def _resolve_preset(name: str) -> str:
    for alias, target in _ALIAS_SUFFIXES.items():
        if name.endswith(alias):
            return name[: -len(alias)] + target
    return name


def load_preset(name: str) -> ExperimentConfig:
    """Load a bundled preset such as ``"double_gyre_desk"``."""
    resolved = _resolve_preset(name)
    if resolved not in preset_names():
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    text = resources.files(_PRESETS).joinpath(f"{resolved}.json").read_text()
    return validate_config(text)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    return validate_config(Path(path))
