"""Tests for flow layers, composed models, composites and checkpoints."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import perturb
from tkrnet import (
    ArchitectureConfig,
    CheckpointError,
    DomainError,
    GaussianDensity,
    PiecewiseModel,
    StackedModel,
    TKRnetModel,
    build_model,
    density_grid_export,
    load_checkpoint,
    load_preset,
    save_checkpoint,
    trapezoid_mass,
)
from tkrnet._diff import ParameterStore
from tkrnet._flow import FixedTimePrior, NonlinearLayer, interval_index, partition_sizes
from tkrnet._flow.base import LayerTime


def _jacobian(
    model: TKRnetModel, x: np.ndarray, t: float, h: float = 1e-6
) -> np.ndarray:
    d = x.size
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        zp, _ = model.forward(x + e, t)
        zm, _ = model.forward(x - e, t)
        jac[:, j] = (zp - zm) / (2 * h)
    return jac


def test_identity_at_time_origin(
    random_model: TKRnetModel, rng: np.random.Generator
) -> None:
    """Every layer is the identity at the model's origin, whatever the weights."""
    x = rng.standard_normal((16, 2))
    z, logdet = random_model.forward(x, 0.0)
    np.testing.assert_allclose(z, x, atol=1e-12)
    np.testing.assert_allclose(logdet, 0.0, atol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0], ids=["origin", "interior", "end"])
def test_inverse_round_trip(
    random_model: TKRnetModel, rng: np.random.Generator, t: float
) -> None:
    x = 2.0 * rng.standard_normal((32, 2))
    z, _ = random_model.forward(x, t)
    np.testing.assert_allclose(random_model.inverse(z, t), x, atol=1e-9)


def test_logdet_matches_numerical_jacobian(
    random_model: TKRnetModel, rng: np.random.Generator
) -> None:
    x = rng.standard_normal(2)
    _, logdet = random_model.forward(x, 0.7)
    _, ref = np.linalg.slogdet(_jacobian(random_model, x, 0.7))
    assert logdet == pytest.approx(ref, abs=1e-6)


def test_density_integrates_to_one(random_model: TKRnetModel) -> None:
    """The model density at an interior time has unit mass."""
    grid = density_grid_export(random_model, 0.6, ((-12, -12), (12, 12)), 241)
    assert trapezoid_mass(grid) == pytest.approx(1.0, abs=1e-2)


def test_per_point_times(random_model: TKRnetModel, rng: np.random.Generator) -> None:
    """A time per row equals evaluating each row at its own time."""
    x = rng.standard_normal((4, 2))
    t = np.array([0.0, 0.25, 0.5, 1.0])
    batch = random_model.log_density(x, t)
    single = [random_model.log_density(x[i], t[i]) for i in range(4)]
    np.testing.assert_allclose(batch, single)


def test_time_outside_interval(random_model: TKRnetModel) -> None:
    with pytest.raises(DomainError, match="time outside"):
        random_model.log_density(np.zeros((1, 2)), 1.5)


def test_wrong_dimension(random_model: TKRnetModel) -> None:
    with pytest.raises(DomainError, match="expected 2 coordinates"):
        random_model.log_density(np.zeros((1, 3)), 0.5)


def test_sample_at_origin_follows_prior(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> None:
    """At the origin the sampler returns prior draws unchanged."""
    prior = GaussianDensity.isotropic([1.0, -2.0], 0.5)
    model = build_model(small_arch, 2, prior, 0.0, 1.0, rng)
    perturb(model, rng)
    a = model.sample(0.0, 100, np.random.default_rng(7))
    b = prior.sample(100, np.random.default_rng(7))
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert model.sample(0.5, 0, rng).shape == (0, 2)


def test_sampling_is_reproducible(random_model: TKRnetModel) -> None:
    a = random_model.sample(0.5, 50, np.random.default_rng(3))
    b = random_model.sample(0.5, 50, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize(
    "dim, blocks, expected",
    [(2, 1, [2]), (3, 2, [2, 1]), (7, 3, [3, 2, 2]), (40, 5, [8] * 5)],
)
def test_partition_sizes(dim: int, blocks: int, expected: list[int]) -> None:
    assert partition_sizes(dim, blocks) == expected


def test_architecture_validation() -> None:
    with pytest.raises(ValidationError, match="hidden_width must be even"):
        ArchitectureConfig(hidden_width=7)
    with pytest.raises(ValidationError):
        ArchitectureConfig(alpha=1.0)
    with pytest.raises(ValidationError, match="partition sizes given"):
        ArchitectureConfig(num_blocks=2, partitions=[3])
    with pytest.raises(ValidationError, match="Extra inputs"):
        ArchitectureConfig(width=3)  # type: ignore[call-arg]


def test_last_block_leaves_frozen_partition(rng: np.random.Generator) -> None:
    """The second of two blocks acts on the first partition only."""
    arch = ArchitectureConfig(
        num_blocks=2, pairs_per_block=2, hidden_width=8, depth=2, nonlinear=False
    )
    model = build_model(arch, 3, GaussianDensity.isotropic([0, 0, 0], 1.0), 0, 1, rng)
    assert model.partitions == [2, 1]
    actives = [layer.active for layer in model.layers]
    assert actives == [3, 3, 3, 3, 2, 2, 2, 2]


def test_nonlinear_layer_is_monotone_and_invertible(rng: np.random.Generator) -> None:
    layer = NonlinearLayer("nl", 1, mesh_size=6, bound=2.0)
    store = ParameterStore()
    layer.init_params(store, rng)
    store.load_vector(rng.standard_normal(store.size))
    p = store.view()
    x = np.linspace(-3, 3, 101).reshape(-1, 1)
    tau = np.full((101, 1), 0.8)
    time = LayerTime(tau, tau, tau)
    y, logdet = layer.forward(p, x, time)
    assert np.all(np.diff(y[:, 0]) > 0)
    outside = np.abs(x[:, 0]) > 2.0
    np.testing.assert_allclose(y[outside], x[outside])
    np.testing.assert_allclose(logdet[outside], 0.0)
    np.testing.assert_allclose(layer.inverse(p, y, time), x, atol=1e-10)
    # end points of the domain are fixed
    yb, _ = layer.forward(p, np.array([[-2.0], [2.0]]), LayerTime(*[tau[:2]] * 3))
    np.testing.assert_allclose(yb[:, 0], [-2.0, 2.0], atol=1e-12)


def test_interval_index_assigns_right_closed_intervals() -> None:
    bps = np.array([0.0, 1.0, 2.0, 3.0])
    idx = interval_index(bps, [0.0, 0.5, 1.0, 1.0 + 1e-9, 3.0])
    np.testing.assert_array_equal(idx, [0, 0, 0, 1, 2])
    with pytest.raises(DomainError):
        interval_index(bps, 3.5)


def _two_interval_stack(
    arch: ArchitectureConfig, rng: np.random.Generator
) -> StackedModel:
    prior = GaussianDensity.isotropic([0.0, 0.0], 1.0)
    first = build_model(arch, 2, prior, 0.0, 1.0, rng)
    perturb(first, rng)
    second = build_model(
        arch,
        2,
        FixedTimePrior(StackedModel([first], [0.0, 1.0]), 1.0),
        1.0,
        2.0,
        rng,
        time_feature=True,
    )
    perturb(second, rng)
    return StackedModel([first, second], [0.0, 1.0, 2.0])


def test_stacked_density_is_continuous_at_interfaces(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> None:
    stack = _two_interval_stack(small_arch, rng)
    x = rng.standard_normal((8, 2))
    left = stack.models[0].log_density(x, 1.0)
    right = stack.models[1].log_density(x, 1.0)
    np.testing.assert_allclose(left, right, atol=1e-10)
    np.testing.assert_allclose(stack.log_density(x, 1.0), left)


def test_stacked_density_has_unit_mass(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> None:
    stack = _two_interval_stack(small_arch, rng)
    grid = density_grid_export(stack, 1.6, ((-12, -12), (12, 12)), 241)
    assert trapezoid_mass(grid) == pytest.approx(1.0, abs=1e-2)


def test_piecewise_model_dispatches_by_time(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> None:
    prior = GaussianDensity.isotropic([0.0, 0.0], 1.0)
    models = [build_model(small_arch, 2, prior, 0.0, 2.0, rng) for _ in range(2)]
    for m in models:
        perturb(m, rng)
    pw = PiecewiseModel(models, [0.0, 1.0, 2.0])
    x = rng.standard_normal((2, 2))
    out = pw.log_density(x, np.array([0.5, 1.5]))
    assert out[0] == pytest.approx(models[0].log_density(x[0], 0.5))
    assert out[1] == pytest.approx(models[1].log_density(x[1], 1.5))
    with pytest.raises(DomainError, match="breakpoints"):
        PiecewiseModel(models, [0.0, 2.0])


@pytest.mark.parametrize("kind", ["single", "stacked"])
def test_checkpoint_round_trip(
    kind: str,
    random_model: TKRnetModel,
    small_arch: ArchitectureConfig,
    rng: np.random.Generator,
    tmp_path: Path,
) -> None:
    """Restored models reproduce the saved log-density exactly."""
    model = random_model if kind == "single" else _two_interval_stack(small_arch, rng)
    path = save_checkpoint(model, tmp_path / "ckpt.json", seed=5)
    restored = load_checkpoint(path)
    assert type(restored) is type(model)
    x = rng.standard_normal((6, 2))
    t = 0.9 if kind == "single" else 1.7
    np.testing.assert_array_equal(restored.log_density(x, t), model.log_density(x, t))


def test_checkpoint_errors(tmp_path: Path) -> None:
    missing = tmp_path / "nope.json"
    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(missing)
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "model", "dim": 2}')
    with pytest.raises(CheckpointError, match="corrupt"):
        load_checkpoint(bad)


BENCHMARKS = [
    "double_gyre_full",
    "kraichnan_orszag_full",
    "duffing_full",
    "lorenz96_full",
]


def _benchmark_model(
    preset: str, rng: np.random.Generator
) -> tuple[TKRnetModel, np.ndarray, np.ndarray]:
    """A perturbed model with the preset's architecture and 1024 points (x, t)."""
    cfg = load_preset(preset)
    system = cfg.system.build()
    model = build_model(
        cfg.architecture, system.dim, system.initial, 0.0, cfg.t_final, rng
    )
    perturb(model, rng, scale=0.1)
    x = system.sample_p0(rng, 1024) + 0.5 * rng.standard_normal((1024, system.dim))
    t = cfg.t_final * rng.random(1024)
    return model, x, t


@pytest.mark.parametrize("preset", BENCHMARKS, ids=["d2", "d3", "d7", "d40"])
def test_benchmark_round_trip(preset: str, rng: np.random.Generator) -> None:
    model, x, t = _benchmark_model(preset, rng)
    z, logdet = model.forward(x, t)
    assert np.all(np.isfinite(logdet))
    assert np.max(np.abs(model.inverse(z, t) - x)) <= 1e-8


@pytest.mark.parametrize("preset", BENCHMARKS[:3], ids=["d2", "d3", "d7"])
def test_benchmark_logdet_matches_dense_jacobian(
    preset: str, rng: np.random.Generator
) -> None:
    model, x, t = _benchmark_model(preset, rng)
    x, t = x[:100], t[:100]
    n, d = x.shape
    h = 1e-6
    step = h * np.eye(d)
    # rows (i, j) hold x_i shifted along coordinate j
    xp = (x[:, None, :] + step).reshape(-1, d)
    xm = (x[:, None, :] - step).reshape(-1, d)
    tt = np.repeat(t, d)
    zp, _ = model.forward(xp, tt)
    zm, _ = model.forward(xm, tt)
    jac = ((zp - zm) / (2 * h)).reshape(n, d, d).transpose(0, 2, 1)
    sign, ref = np.linalg.slogdet(jac)
    assert np.all(sign > 0)
    _, logdet = model.forward(x, t)
    np.testing.assert_allclose(logdet, ref, rtol=1e-5, atol=1e-6)


def test_three_interval_stack_matches_composition(
    small_arch: ArchitectureConfig, rng: np.random.Generator
) -> None:
    """The stacked log-density is the chain of local inverse maps and the prior."""
    prior = GaussianDensity.isotropic([0.5, -0.5], 0.8)
    bps = [0.0, 0.4, 1.0, 1.5]
    models: list[TKRnetModel] = []
    for i in range(3):
        local_prior = (
            prior
            if i == 0
            else FixedTimePrior(StackedModel(models, bps[: i + 1]), bps[i])
        )
        model = build_model(
            small_arch, 2, local_prior, bps[i], bps[i + 1], rng, time_feature=i > 0
        )
        perturb(model, rng)
        models.append(model)
    stack = StackedModel(models, bps)

    x = rng.standard_normal((64, 2))
    for t in (0.2, 0.7, 1.0, 1.3, 1.5):
        owner = int(interval_index(np.asarray(bps), t))
        y, total = x, np.zeros(len(x))
        for i in range(owner, -1, -1):
            y, logdet = models[i].forward(y, t if i == owner else bps[i + 1])
            total += logdet
        expected = prior.log_prob(y) + total
        np.testing.assert_allclose(stack.log_density(x, t), expected, atol=1e-10)
