"""Tests for collocation sampling, the optimizer and the training drivers."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from tkrnet import (
    ArchitectureConfig,
    DensityModelView,
    DomainError,
    GaussianDensity,
    LossVariant,
    PiecewiseModel,
    SeedStreams,
    StackedModel,
    SystemSpec,
    TKRnetModel,
    TrainConfig,
    TrainingConfig,
    build_model,
    double_gyre,
    interface_cross_entropy,
    train,
    train_adaptive,
    train_temporal_choice1,
    train_temporal_choice2,
)
from tkrnet._train import (
    AdamWState,
    Choice1Decomposition,
    Choice2Decomposition,
    CollocationSet,
    CosineSchedule,
    TrainingEvent,
    TrainingLog,
    adamw_step,
    cosine_lr,
    init_collocation,
    make_time_grid,
    resample_collocation,
    run_epochs,
)
from tkrnet._train.drivers import _objective


@pytest.fixture
def system() -> SystemSpec:
    return double_gyre(t_final=1.0)


def _config(small_arch: ArchitectureConfig, **updates: object) -> TrainConfig:
    data: dict = {
        "seed": 7,
        "architecture": small_arch.model_dump(),
        "training": {
            "epochs": 2,
            "adaptive_iterations": 2,
            "batches": 2,
            "learning_rate": 1e-2,
        },
        "time_grid": {"steps": 4, "points": 6},
    }
    data.update(updates)
    return TrainConfig.model_validate(data)


def test_time_grid_layout() -> None:
    times = make_time_grid(5.0, 250, 1000)
    assert times.size == 250_000
    stamps = np.unique(times)
    np.testing.assert_allclose(np.diff(stamps), 0.02)
    assert stamps[0] == pytest.approx(0.02)
    assert times[-1] == 5.0
    np.testing.assert_allclose(
        make_time_grid(2.0, 4, 1, t_start=1.0), [1.25, 1.5, 1.75, 2.0]
    )


@pytest.mark.parametrize(
    "args, match",
    [((1.0, 0, 5), "must be positive"), ((1.0, 3, 5, 1.0), "empty time interval")],
    ids=["steps", "interval"],
)
def test_time_grid_errors(args: tuple, match: str) -> None:
    with pytest.raises(DomainError, match=match):
        make_time_grid(*args)


def test_batches_partition_points(rng: np.random.Generator) -> None:
    colloc = init_collocation(
        ([0.0, 0.0], [2.0, 1.0]), make_time_grid(1.0, 5, 5), rng, num_batches=4
    )
    parts = colloc.batches(rng)
    assert len(parts) == 4
    assert sorted(np.concatenate(parts).tolist()) == list(range(25))
    assert {len(p) for p in parts} <= {6, 7}
    assert np.all((colloc.x >= [0.0, 0.0]) & (colloc.x <= [2.0, 1.0]))


def test_collocation_validation() -> None:
    with pytest.raises(DomainError, match="cannot split"):
        CollocationSet(np.zeros((3, 2)), np.zeros(3), num_batches=4)
    with pytest.raises(DomainError, match="do not pair up"):
        CollocationSet(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(DomainError, match="low < high"):
        init_collocation(([0.0], [0.0]), np.ones(3), np.random.default_rng(0))


def test_resampling_at_origin_draws_from_prior(random_model: TKRnetModel) -> None:
    colloc = resample_collocation(
        random_model, np.zeros(50), np.random.default_rng(3), adapt_iter=2
    )
    expected = random_model.prior.sample(50, np.random.default_rng(3))
    np.testing.assert_allclose(colloc.x, expected, atol=1e-12)
    assert colloc.adapt_iter == 2


def test_seed_streams() -> None:
    a, b = SeedStreams(11), SeedStreams(11)
    np.testing.assert_array_equal(a.init.random(4), b["init"].random(4))
    draws = {name: SeedStreams(11)[name].random() for name in SeedStreams.names}
    assert len(set(draws.values())) == len(SeedStreams.names)


def test_adamw_first_step() -> None:
    theta = np.array([1.0, 2.0, 3.0])
    grad = np.array([0.5, -1.0, 2.0])
    state = AdamWState.zeros(3, lr=0.1, weight_decay=0.01)
    new, state = adamw_step(state, theta, grad)
    # bias correction makes the first update lr * g / (|g| + eps)
    expected = theta - 0.1 * 0.01 * theta - 0.1 * grad / (np.abs(grad) + 1e-8)
    np.testing.assert_allclose(new, expected)
    assert state.step == 1
    np.testing.assert_allclose(state.m, 0.1 * grad)
    np.testing.assert_allclose(state.v, 0.001 * grad**2)


def _scripted_adamw(
    theta: list[float],
    grads: list[list[float]],
    lrs: list[float],
    b1: float,
    b2: float,
    eps: float,
    wd: float,
) -> list[list[float]]:
    """Coordinate-by-coordinate AdamW, written out with plain floats."""
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    trace = []
    for k, (g, lr) in enumerate(zip(grads, lrs), start=1):
        new = []
        for i, th in enumerate(theta):
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] ** 2
            m_hat = m[i] / (1 - b1**k)
            v_hat = v[i] / (1 - b2**k)
            new.append(th - lr * wd * th - lr * m_hat / (math.sqrt(v_hat) + eps))
        theta = new
        trace.append(new)
    return trace


def test_adamw_two_step_trace() -> None:
    """Second steps use non-zero moments; decay acts on the pre-step parameters."""
    theta0 = [1.0, -2.0, 0.5, 0.0]
    grads = [[0.3, -1.2, 2.0, 1e-3], [-0.7, -0.4, 1.5, 2.0]]
    lrs = [0.05, 0.02]
    betas = (0.8, 0.95)
    state = AdamWState.zeros(4, lr=0.05, betas=betas, eps=1e-6, weight_decay=0.1)
    theta = np.array(theta0)
    trace = []
    for g, lr in zip(grads, lrs):
        theta, state = adamw_step(state, theta, np.array(g), lr)
        trace.append(theta)
    expected = _scripted_adamw(theta0, grads, lrs, *betas, eps=1e-6, wd=0.1)
    np.testing.assert_allclose(trace, expected, rtol=0, atol=1e-12)
    assert (state.step, state.lr) == (2, 0.02)


def test_adamw_shape_mismatch() -> None:
    with pytest.raises(ValueError, match="must match"):
        adamw_step(AdamWState.zeros(2), np.zeros(3), np.zeros(3))


def test_cosine_schedule() -> None:
    schedule = CosineSchedule(eta_max=1e-2, total_steps=10, eta_min=1e-4)
    assert cosine_lr(schedule, 0) == pytest.approx(1e-2)
    assert cosine_lr(schedule, 5) == pytest.approx((1e-2 + 1e-4) / 2)
    assert cosine_lr(schedule, 10) == pytest.approx(1e-4)
    assert cosine_lr(schedule, 25) == pytest.approx(1e-4)
    with pytest.raises(ValueError, match="eta_min"):
        CosineSchedule(eta_max=1e-3, total_steps=1, eta_min=1e-2)


def test_adaptive_training_lowers_loss(
    system: SystemSpec, small_arch: ArchitectureConfig
) -> None:
    cfg = _config(
        small_arch,
        training={"epochs": 25, "adaptive_iterations": 1, "learning_rate": 1e-2},
    )
    result = train_adaptive(system, cfg)
    losses = result.log.losses()
    assert len(losses) == 25
    assert losses[-1] < losses[0]
    assert isinstance(result.model, TKRnetModel)


def test_adaptive_training_events(
    system: SystemSpec, small_arch: ArchitectureConfig, tmp_path: Path
) -> None:
    events: list[TrainingEvent] = []
    result = train_adaptive(system, _config(small_arch), callback=events.append)
    assert [(e.interval, e.adapt_iter) for e in events] == [(None, 0), (None, 1)]
    assert all(e.t_end == 1.0 for e in events)
    # 2 iterations x 2 epochs x 2 batches
    assert len(result.log) == 8
    assert len(result.log.losses(adapt_iter=1)) == 4
    header = result.log.write(tmp_path / "metrics.csv").read_text().splitlines()[0]
    assert header == "adapt_iter,epoch,batch,loss,lr"


def test_training_is_reproducible(
    system: SystemSpec, small_arch: ArchitectureConfig
) -> None:
    first = train_adaptive(system, _config(small_arch))
    second = train_adaptive(system, _config(small_arch))
    np.testing.assert_array_equal(first.log.losses(), second.log.losses())
    np.testing.assert_array_equal(
        first.model.store.vector,  # type: ignore[attr-defined]
        second.model.store.vector,  # type: ignore[attr-defined]
    )


def test_choice1_training(system: SystemSpec, small_arch: ArchitectureConfig) -> None:
    events: list[TrainingEvent] = []
    cfg = _config(small_arch, decomposition={"kind": "choice1", "intervals": 2})
    result = train_temporal_choice1(system, cfg, callback=events.append)
    assert isinstance(result.model, PiecewiseModel)
    np.testing.assert_allclose(result.model.breakpoints, [0.0, 0.5, 1.0])
    assert [(e.interval, e.adapt_iter) for e in events] == [
        (0, 0),
        (0, 1),
        (1, 0),
        (1, 1),
    ]
    assert [e.t_end for e in events] == [0.5, 0.5, 1.0, 1.0]
    assert {r.interval for r in result.log.rows} == {0, 1}
    x = result.model.sample(0.75, 5, np.random.default_rng(0))
    assert np.all(np.isfinite(result.model.log_density(x, 0.75)))


def test_interface_cross_entropy_decreases(small_arch: ArchitectureConfig) -> None:
    """The second interval learns the first interval's density at the interface.

    The first interval is stood in for by exact draws of ``dx/dt = -x`` at
    ``t = 0.5``, where the density is ``N(0, exp(-1))``.
    """
    system = SystemSpec(
        name="contraction",
        dim=1,
        velocity=lambda x, t: -x,
        divergence=lambda x, t: np.full(x.shape[:-1], -1.0),
        initial=GaussianDensity.isotropic([0.0], 1.0),
        box_low=np.array([-3.0]),
        box_high=np.array([3.0]),
        t_final=1.0,
    )
    rng = np.random.default_rng(3)
    arch = small_arch.model_copy(update={"nonlinear": False})
    model = build_model(arch, 1, system.initial, 0.0, 1.0, rng)
    samples = math.exp(-0.5) * rng.standard_normal((256, 1))
    colloc = init_collocation(
        system.init_box, make_time_grid(1.0, 4, 16, t_start=0.5), rng
    )
    objective = _objective(model, system, LossVariant.LOG, ([samples], 0.5, 1.0))

    def cross_entropy() -> float:
        return float(interface_cross_entropy(DensityModelView(model), samples, 0.5))

    before = cross_entropy()
    tc = TrainingConfig(epochs=50, batches=1, learning_rate=1e-2, weight_decay=0.0)
    log = TrainingLog()
    run_epochs(model, objective, colloc, tc, rng, log, adapt_iter=0, interval=1)
    assert len(log) == 50
    assert cross_entropy() < before


def test_choice2_training(system: SystemSpec, small_arch: ArchitectureConfig) -> None:
    cfg = _config(
        small_arch,
        decomposition={
            "kind": "choice2",
            "intervals": 2,
            "breakpoints": [0.0, 0.4, 1.0],
        },
    )
    result = train(system, cfg)
    stack = result.model
    assert isinstance(stack, StackedModel)
    assert [m.t_origin for m in stack.models] == [0.0, 0.4]
    assert not stack.models[1].arch.nonlinear
    x = np.random.default_rng(1).uniform([0.0, 0.0], [2.0, 1.0], (10, 2))
    # the second local flow is the identity at its origin
    np.testing.assert_allclose(
        stack.models[1].log_density(x, 0.4), stack.models[0].log_density(x, 0.4)
    )


def test_single_interval_choice2_matches_adaptive(
    system: SystemSpec, small_arch: ArchitectureConfig
) -> None:
    """One local flow with the plain loss is exactly the adaptive model."""
    plain_arch = small_arch.model_copy(update={"nonlinear": False})
    adaptive = train_adaptive(
        system,
        _config(
            plain_arch,
            training={
                "epochs": 2,
                "adaptive_iterations": 2,
                "batches": 2,
                "learning_rate": 1e-2,
                "loss": "plain",
            },
        ),
    )
    stacked = train_temporal_choice2(
        system, _config(small_arch, decomposition="choice2")
    )
    np.testing.assert_array_equal(adaptive.log.losses(), stacked.log.losses())


def test_drivers_fall_back_to_a_single_interval(
    system: SystemSpec, small_arch: ArchitectureConfig
) -> None:
    result = train_temporal_choice1(system, _config(small_arch))
    assert isinstance(result.model, PiecewiseModel)
    assert len(result.model.models) == 1


@pytest.mark.parametrize(
    "data, match",
    [
        ({"intervals": 2, "breakpoints": [0.0, 1.0]}, "need 3 breakpoints"),
        ({"intervals": 2, "breakpoints": [0.1, 0.5, 1.0]}, "start at 0"),
        ({"intervals": 2, "breakpoints": [0.0, 0.5, 0.5]}, "increase"),
    ],
)
def test_decomposition_validation(data: dict, match: str) -> None:
    with pytest.raises(ValidationError, match=match):
        Choice1Decomposition.model_validate(data)


def test_decomposition_resolve() -> None:
    np.testing.assert_allclose(
        Choice2Decomposition(intervals=4).resolve(2.0), [0.0, 0.5, 1.0, 1.5, 2.0]
    )
    with pytest.raises(ValueError, match="differs from T"):
        Choice1Decomposition(intervals=1, breakpoints=[0.0, 1.0]).resolve(2.0)


def test_learning_rate_bounds() -> None:
    with pytest.raises(ValidationError, match="cannot exceed"):
        TrainConfig.model_validate(
            {
                "time_grid": {"steps": 1, "points": 1},
                "training": {"learning_rate": 1e-3, "min_learning_rate": 1e-2},
            }
        )
