from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from tkrnet import ArchitectureConfig, GaussianDensity, TKRnetModel, build_model

if TYPE_CHECKING:
    from collections.abc import Iterator


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch() -> ArchitectureConfig:
    return ArchitectureConfig(
        num_blocks=1, pairs_per_block=2, hidden_width=8, depth=2, mesh_size=8
    )


def perturb(model: TKRnetModel, rng: np.random.Generator, scale: float = 0.3) -> None:
    """Move every parameter off its identity initialization."""
    v = model.store.vector
    model.store.load_vector(v + scale * rng.standard_normal(v.size))


@pytest.fixture
def random_model(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> Iterator[TKRnetModel]:
    """A 2-d model on [0, 1] with non-trivial parameters."""
    prior = GaussianDensity.isotropic([0.0, 0.0], 1.0)
    model = build_model(small_arch, 2, prior, 0.0, 1.0, rng)
    perturb(model, rng)
    yield model
