"""Tests for the reference ensemble and accuracy metrics."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest
from pydantic import ValidationError

from tkrnet import (
    DensityGrid,
    DensityModelView,
    GaussianDensity,
    MetricsTable,
    SeedStreams,
    SystemSpec,
    TKRnetModel,
    density_grid_export,
    evaluate,
    kl_bound_diagnostic,
    kl_estimate,
    load_preset,
    reference_ensemble,
    relative_error,
    residual,
    residual_log,
    train,
    trapezoid_mass,
)
from tkrnet._diff import ops
from tkrnet._eval import MetricsRow, moment_table

DIM = 2


def _contraction(dim: int = DIM) -> SystemSpec:
    """``dx/dt = -x`` from a standard normal; ``p(., t) = N(0, exp(-2t) I)``."""
    return SystemSpec(
        name="contraction",
        dim=dim,
        velocity=lambda x, t: -x,
        divergence=lambda x, t: np.full(x.shape[:-1], -float(dim)),
        initial=GaussianDensity.isotropic(np.zeros(dim), 1.0),
        box_low=np.full(dim, -3.0),
        box_high=np.full(dim, 3.0),
        t_final=1.0,
    )


class ExactDensity:
    """Closed-form solution of the contraction system."""

    dim = DIM

    def log_density(self, x: Any, t: Any, params: Any = None) -> Any:
        z = x * ops.exp(t)
        norm = 0.5 * self.dim * math.log(2 * math.pi)
        return (-0.5 * (z * z) + t).sum(axis=-1) - norm

    def sample(self, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
        return math.exp(-t) * rng.standard_normal((n, self.dim))


@pytest.fixture
def ensemble(rng: np.random.Generator) -> Any:
    return reference_ensemble(_contraction(), 400, [0.5, 0.25, 1.0], rng)


def test_reference_times_start_at_zero(ensemble: Any) -> None:
    np.testing.assert_array_equal(ensemble.times, [0.0, 0.25, 0.5, 1.0])
    assert ensemble.states.shape == (400, 4, DIM)
    with pytest.raises(ValueError, match="non-negative"):
        reference_ensemble(_contraction(), 3, [-1.0], np.random.default_rng(0))


def test_exact_density_has_vanishing_metrics(ensemble: Any) -> None:
    table = evaluate(ExactDensity(), _contraction(), ensemble, [1.0, 0.0, 0.5])
    assert table.column("t").tolist() == [0.0, 0.5, 1.0]
    np.testing.assert_allclose(table.column("rel_err"), 0.0, atol=1e-6)
    np.testing.assert_allclose(table.column("kl"), 0.0, atol=1e-6)
    np.testing.assert_allclose(table.column("mean_abs_rlog"), 0.0, atol=1e-8)


def test_kl_of_wrong_density_is_positive(ensemble: Any) -> None:
    """The initial density left in place is wrong once the flow contracts."""

    class Frozen(ExactDensity):
        def log_density(self, x: Any, t: Any, params: Any = None) -> Any:
            return super().log_density(x, 0.0)

    frozen = Frozen()
    assert kl_estimate(frozen, ensemble, 0.0) == pytest.approx(0.0, abs=1e-9)
    # KL(N(0, s^2) || N(0, 1)) per coordinate is (s^2 - 1 - log s^2) / 2
    s2 = math.exp(-2.0)
    expected = DIM * (s2 - 1.0 - math.log(s2)) / 2
    assert kl_estimate(frozen, ensemble, 1.0) == pytest.approx(expected, rel=0.15)
    assert relative_error(frozen, ensemble, 1.0) > 0.5


def test_kl_bound_rows(ensemble: Any) -> None:
    rows = kl_bound_diagnostic(
        ExactDensity(), _contraction(), ensemble, [0.0, 0.25, 0.5, 1.0]
    )
    # boundary times have no central difference
    assert [r.t for r in rows] == [0.25, 0.5]
    for row in rows:
        assert row.dkl_dt == pytest.approx(0.0, abs=1e-6)
        assert row.bound == pytest.approx(0.0, abs=1e-8)


def test_moment_table(ensemble: Any) -> None:
    rng = np.random.default_rng(5)
    rows = moment_table(ExactDensity(), ensemble, [0.0, 1.0], 4000, rng)
    assert [(r.t, r.dim) for r in rows] == [(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)]
    for row in rows:
        var = math.exp(-2.0 * row.t)
        assert row.var_model == pytest.approx(var, rel=0.1)
        assert row.var_ref == pytest.approx(var, rel=0.25)
        assert abs(row.mean_model) < 0.1


def test_density_grid_mass() -> None:
    grid = density_grid_export(ExactDensity(), 0.5, ((-4.0, -4.0), (4.0, 4.0)), 161)
    assert grid.density.shape == (161, 161)
    assert trapezoid_mass(grid) == pytest.approx(1.0, abs=1e-4)
    rows = grid.rows()
    assert len(rows) == 161 * 161
    assert (rows[0].coord1, rows[0].coord2, rows[0].t) == (-4.0, -4.0, 0.5)


def test_trapezoid_of_constant() -> None:
    c = np.linspace(0.0, 2.0, 5)
    grid = DensityGrid(0.0, c, np.linspace(0.0, 1.0, 3), np.full((5, 3), 3.0))
    assert trapezoid_mass(grid) == pytest.approx(6.0)


def test_density_grid_needs_a_slice_in_higher_dimensions() -> None:
    class ThreeD(ExactDensity):
        dim = 3

    with pytest.raises(ValueError, match="slice_at"):
        density_grid_export(ThreeD(), 0.0, ((0.0, 0.0), (1.0, 1.0)), 5)
    with pytest.raises(ValueError, match="at least 2"):
        density_grid_export(ExactDensity(), 0.0, ((0.0, 0.0), (1.0, 1.0)), 1)


def test_metrics_table_must_be_sorted() -> None:
    rows = [
        MetricsRow(t=1.0, rel_err=0.1, kl=0.01, mean_abs_rlog=0.2),
        MetricsRow(t=0.5, rel_err=0.1, kl=0.03, mean_abs_rlog=0.2),
    ]
    with pytest.raises(ValidationError, match="strictly increasing"):
        MetricsTable(rows=rows)
    assert MetricsTable(rows=rows[::-1]).mean_kl == pytest.approx(0.02)


class Exact1D(ExactDensity):
    dim = 1


def test_exact_transport_has_zero_residual() -> None:
    """The closed-form density of ``dx/dt = -x`` solves the Liouville equation."""
    rng = np.random.default_rng(11)
    x = rng.uniform(-3.0, 3.0, (1000, 1))
    t = rng.random(1000)
    view = DensityModelView(Exact1D())
    system = _contraction(1)
    r_log = residual_log(view, system, x, t)
    r = residual(view, system, x, t)
    assert r_log.shape == r.shape == (1000,)
    assert np.max(np.abs(r_log)) <= 1e-8
    assert np.max(np.abs(r)) <= 1e-8


def test_residual_is_density_times_log_residual(
    random_model: TKRnetModel, rng: np.random.Generator
) -> None:
    system = _contraction()
    x = rng.uniform(-3.0, 3.0, (1000, DIM))
    t = rng.random(1000)
    view = DensityModelView(random_model)
    r_log = residual_log(view, system, x, t)
    assert np.min(np.abs(r_log)) > 0
    expected = np.exp(random_model.log_density(x, t)) * r_log
    np.testing.assert_allclose(residual(view, system, x, t), expected, rtol=1e-10)


@pytest.mark.slow
def test_lorenz96_desk_means() -> None:
    """Training at desk budget tracks the characteristics' means in 10 dimensions."""
    cfg = load_preset("lorenz96_desk")
    system = cfg.system.build()
    assert system.dim == 10
    result = train(system, cfg)
    assert np.all(np.isfinite(result.log.losses()))
    streams = SeedStreams(cfg.seed)
    ensemble = reference_ensemble(system, 5000, [0.5, 1.0], streams.evaluation)
    rows = moment_table(result.model, ensemble, [0.5, 1.0], 5000, streams.evaluation)
    assert len(rows) == 20
    worst = max(abs(r.mean_model - r.mean_ref) for r in rows)
    assert worst < 5e-2
