"""Reference solutions and accuracy metrics of trained densities."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from pydantic import ConfigDict, BaseModel, model_validator
from typing_extensions import Self

from tkrnet._flow import DensityModel
from tkrnet._loss import DensityModelView, residual_log
from tkrnet._odeint import CharacteristicEnsemble, IntegratorConfig, integrate_ensemble
from tkrnet._systems import SystemSpec

__all__ = [
    "DensityGrid",
    "DensityRow",
    "KLBoundRow",
    "MetricsRow",
    "MetricsTable",
    "MomentErrors",
    "MomentRow",
    "density_grid_export",
    "evaluate",
    "kl_bound_diagnostic",
    "kl_estimate",
    "mean_abs_residual",
    "moment_errors",
    "moment_table",
    "reference_ensemble",
    "relative_error",
    "trapezoid_mass",
]

logger = logging.getLogger(__name__)


class _Row(BaseModel):
    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "allow_inf_nan": False}


class MetricsRow(_Row):
    t: float
    rel_err: float
    kl: float
    mean_abs_rlog: float


class MetricsTable(_Row):
    """Accuracy metrics at increasing times, as written to ``errors.csv``."""

    rows: list[MetricsRow]

    @model_validator(mode="after")
    def _sorted(self) -> Self:
        ts = [r.t for r in self.rows]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("metric times must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def mean_kl(self) -> float:
        """Time average of the KL estimate."""
        return float(np.mean(self.column("kl")))


class MomentRow(_Row):
    t: float
    dim: int
    mean_ref: float
    mean_model: float
    var_ref: float
    var_model: float


class KLBoundRow(_Row):
    t: float
    dkl_dt: float
    dkl_dt_se: float
    bound: float
    bound_se: float
    flagged: bool


class DensityRow(_Row):
    coord1: float
    coord2: float
    t: float
    p: float


def reference_ensemble(
    system: SystemSpec,
    n: int,
    times: Sequence[float] | np.ndarray,
    rng: np.random.Generator,
    config: IntegratorConfig | None = None,
    *,
    threads: int = 1,
    chunk_size: int = 1000,
) -> CharacteristicEnsemble:
    """Characteristics of ``n`` draws from the initial density.

    ``times`` are the output times; ``0`` is prepended when missing.
    """
    ts = np.unique(np.asarray(times, dtype=np.float64))
    if ts.size == 0 or ts[0] < 0:
        raise ValueError("reference times must be non-negative")
    if ts[0] > 0:
        ts = np.concatenate([[0.0], ts])
    x0 = system.sample_p0(rng, n)
    return integrate_ensemble(
        system, x0, ts, config, threads=threads, chunk_size=chunk_size
    )


def _log_ratio(
    model: DensityModel, ensemble: CharacteristicEnsemble, t: float
) -> np.ndarray:
    """``log p_ref - log p_model`` at the ensemble states at time ``t``."""
    x, log_ref = ensemble.at(t)
    log_model = np.asarray(model.log_density(x, t))
    return log_ref - log_model


def relative_error(
    model: DensityModel, ensemble: CharacteristicEnsemble, t: float
) -> float:
    """Mean of ``|p - p_model| / p`` over the reference states."""
    with np.errstate(over="ignore"):
        return float(np.mean(np.abs(1.0 - np.exp(-_log_ratio(model, ensemble, t)))))


def kl_estimate(
    model: DensityModel, ensemble: CharacteristicEnsemble, t: float
) -> float:
    """Monte Carlo estimate of ``KL(p || p_model)`` from reference draws."""
    return float(np.mean(_log_ratio(model, ensemble, t)))


def mean_abs_residual(
    model: DensityModel,
    system: SystemSpec,
    ensemble: CharacteristicEnsemble,
    t: float,
) -> tuple[float, float]:
    """Mean of ``|r_log|`` at the reference states and its standard error."""
    x, _ = ensemble.at(t)
    r = np.abs(residual_log(DensityModelView(model), system, x, t))
    se = float(np.std(r, ddof=1) / np.sqrt(r.size)) if r.size > 1 else 0.0
    return float(np.mean(r)), se


@dataclass(frozen=True, eq=False)
class MomentErrors:
    t: float
    mean_ref: np.ndarray
    mean_model: np.ndarray
    var_ref: np.ndarray
    var_model: np.ndarray

    @property
    def mean_error(self) -> np.ndarray:
        return np.abs(self.mean_model - self.mean_ref)

    @property
    def var_error(self) -> np.ndarray:
        return np.abs(self.var_model - self.var_ref)

    def rows(self) -> list[MomentRow]:
        return [
            MomentRow(
                t=self.t,
                dim=i,
                mean_ref=float(self.mean_ref[i]),
                mean_model=float(self.mean_model[i]),
                var_ref=float(self.var_ref[i]),
                var_model=float(self.var_model[i]),
            )
            for i in range(self.mean_ref.size)
        ]


def moment_errors(
    model: DensityModel,
    ensemble: CharacteristicEnsemble,
    t: float,
    n_model_samples: int,
    rng: np.random.Generator,
) -> MomentErrors:
    """Per-coordinate mean and (unbiased) variance of reference and model."""
    if n_model_samples < 2 or len(ensemble) < 2:
        raise ValueError("moment estimates need at least two samples")
    x_ref, _ = ensemble.at(t)
    x_model = model.sample(t, n_model_samples, rng)
    return MomentErrors(
        t=float(t),
        mean_ref=x_ref.mean(axis=0),
        mean_model=x_model.mean(axis=0),
        var_ref=x_ref.var(axis=0, ddof=1),
        var_model=x_model.var(axis=0, ddof=1),
    )


def moment_table(
    model: DensityModel,
    ensemble: CharacteristicEnsemble,
    times: Sequence[float],
    n_model_samples: int,
    rng: np.random.Generator,
) -> list[MomentRow]:
    """Rows of ``moments.csv`` for every time in ``times``."""
    rows: list[MomentRow] = []
    for t in times:
        rows.extend(moment_errors(model, ensemble, t, n_model_samples, rng).rows())
    return rows


def kl_bound_diagnostic(
    model: DensityModel,
    system: SystemSpec,
    ensemble: CharacteristicEnsemble,
    times: Sequence[float],
    *,
    n_se: float = 3.0,
) -> list[KLBoundRow]:
    """Compare ``d/dt KL`` with the bound ``E_p |r_log|`` at interior times.

    The derivative is a central difference between the neighbouring output
    times of ``ensemble``; both sides come with Monte Carlo standard errors and
    a row is flagged when the derivative exceeds the bound by more than
    ``n_se`` combined standard errors.  Times without a neighbour on both
    sides are skipped.
    """
    rows: list[KLBoundRow] = []
    for t in times:
        i = ensemble.time_index(t)
        if i == 0 or i == ensemble.times.size - 1:
            logger.debug("skipping KL bound check at boundary time %s", t)
            continue
        t_lo, t_hi = float(ensemble.times[i - 1]), float(ensemble.times[i + 1])
        diff = (
            _log_ratio(model, ensemble, t_hi) - _log_ratio(model, ensemble, t_lo)
        ) / (t_hi - t_lo)
        n = diff.size
        dkl = float(np.mean(diff))
        dkl_se = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        bound, bound_se = mean_abs_residual(model, system, ensemble, t)
        flagged = dkl - bound > n_se * float(np.hypot(dkl_se, bound_se))
        if flagged:
            logger.warning(
                "KL derivative %.3e exceeds the residual bound %.3e at t=%s",
                dkl,
                bound,
                t,
            )
        rows.append(
            KLBoundRow(
                t=float(t),
                dkl_dt=dkl,
                dkl_dt_se=dkl_se,
                bound=bound,
                bound_se=bound_se,
                flagged=flagged,
            )
        )
    return rows


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Model density on a tensor grid over two coordinates.

    Attributes
    ----------
    coord1, coord2 : ndarray
        Grid nodes along the two plotted coordinates.
    density : ndarray, shape (len(coord1), len(coord2))
    """

    t: float
    coord1: np.ndarray
    coord2: np.ndarray
    density: np.ndarray

    def rows(self) -> list[DensityRow]:
        return [
            DensityRow(
                coord1=float(a), coord2=float(b), t=self.t, p=float(self.density[i, j])
            )
            for i, a in enumerate(self.coord1)
            for j, b in enumerate(self.coord2)
        ]


def density_grid_export(
    model: DensityModel,
    t: float,
    box: tuple[Sequence[float], Sequence[float]],
    resolution: int,
    *,
    axes: tuple[int, int] = (0, 1),
    slice_at: Any = None,
) -> DensityGrid:
    """Evaluate the model density on a ``resolution x resolution`` grid.

    ``box`` gives the ``(low, high)`` bounds of the two plotted coordinates.
    For ``d > 2`` every other coordinate is fixed at ``slice_at`` (required
    then; usually the initial mean).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    (lo1, lo2), (hi1, hi2) = box
    c1 = np.linspace(lo1, hi1, resolution)
    c2 = np.linspace(lo2, hi2, resolution)
    g1, g2 = np.meshgrid(c1, c2, indexing="ij")
    d = model.dim
    if d > 2 and slice_at is None:
        raise ValueError("slice_at is required for more than two dimensions")
    base = np.zeros(d) if slice_at is None else np.asarray(slice_at, dtype=np.float64)
    x = np.tile(base, (g1.size, 1))
    x[:, axes[0]] = g1.ravel()
    x[:, axes[1]] = g2.ravel()
    with np.errstate(under="ignore"):
        p = np.exp(np.asarray(model.log_density(x, t)))
    return DensityGrid(float(t), c1, c2, p.reshape(g1.shape))


def trapezoid_mass(grid: DensityGrid) -> float:
    """Tensor-product trapezoid integral of ``grid.density``."""

    def weights(c: np.ndarray) -> np.ndarray:
        h = np.diff(c)
        w = np.zeros_like(c)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w

    return float(weights(grid.coord1) @ grid.density @ weights(grid.coord2))


def evaluate(
    model: DensityModel,
    system: SystemSpec,
    ensemble: CharacteristicEnsemble,
    times: Sequence[float],
) -> MetricsTable:
    """Relative error, KL estimate and mean ``|r_log|`` at each time."""
    rows = []
    for t in sorted(times):
        row = MetricsRow(
            t=float(t),
            rel_err=relative_error(model, ensemble, t),
            kl=kl_estimate(model, ensemble, t),
            mean_abs_rlog=mean_abs_residual(model, system, ensemble, t)[0],
        )
        logger.info(
            "t=%g: rel_err %.4e, kl %.4e, |r_log| %.4e",
            row.t,
            row.rel_err,
            row.kl,
            row.mean_abs_rlog,
        )
        rows.append(row)
    return MetricsTable(rows=rows)
