"""Embedded Dormand-Prince 5(4) integration of trajectory ensembles.

Trajectories in a chunk advance together with a shared step size chosen from
the worst per-trajectory error norm, so a chunk's result does not depend on how
many worker threads process the other chunks.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from pydantic import ConfigDict, BaseModel, Field, PositiveFloat, PositiveInt

from tkrnet._errors import IntegrationError
from tkrnet._systems import SystemSpec

__all__ = [
    "CharacteristicEnsemble",
    "IntegratorConfig",
    "integrate",
    "integrate_ensemble",
    "integrate_with_logdensity",
]

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_HAT

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


class IntegratorConfig(BaseModel):
    """Tolerances and limits of the adaptive integrator."""

    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "validate_assignment": True}

    rtol: PositiveFloat = Field(default=1e-8, description="Relative tolerance")
    atol: PositiveFloat = Field(default=1e-10, description="Absolute tolerance")
    max_steps: PositiveInt = Field(
        default=100_000, description="Maximum number of attempted steps per chunk"
    )
    first_step: PositiveFloat | None = Field(
        default=None, description="Initial step size; estimated when omitted"
    )


@dataclass(frozen=True, eq=False)
class CharacteristicEnsemble:
    """States and log-densities along characteristic curves.

    Attributes
    ----------
    times : ndarray, shape (n_times,)
    states : ndarray, shape (n_traj, n_times, d)
    log_density : ndarray, shape (n_traj, n_times)
    """

    times: np.ndarray
    states: np.ndarray
    log_density: np.ndarray

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def dim(self) -> int:
        return int(self.states.shape[-1])

    def time_index(self, t: float) -> int:
        """Index of the output time equal to ``t`` (within rounding)."""
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))
        if hits.size == 0:
            raise KeyError(f"time {t} is not an output time of the ensemble")
        return int(hits[0])

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """States ``(n_traj, d)`` and log-densities ``(n_traj,)`` at time ``t``."""
        i = self.time_index(t)
        return self.states[:, i], self.log_density[:, i]


def _rms(err: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((err / scale) ** 2, axis=-1))


def _initial_step(
    f: RHS, t0: float, y0: np.ndarray, f0: np.ndarray, cfg: IntegratorConfig
) -> float:
    scale = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = float(np.max(_rms(y0, scale)))
    d1 = float(np.max(_rms(f0, scale)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    d2 = float(np.max(_rms(f(t0 + h0, y1) - f0, scale))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(
    f: RHS,
    x0: Any,
    times: Any,
    config: IntegratorConfig | None = None,
    *,
    offset: int = 0,
) -> np.ndarray:
    """Integrate ``dy/dt = f(t, y)`` for a batch of initial states.

    Parameters
    ----------
    f : callable
        ``f(t, y)`` for ``y`` of shape ``(B, m)``, returning the same shape.
    x0 : array-like
        Initial states ``(m,)`` or ``(B, m)`` at ``times[0]``.
    times : array-like
        Strictly increasing output times; the first one is the initial time.
    config : IntegratorConfig, optional
        Tolerances; defaults to ``rtol=1e-8``, ``atol=1e-10``.
    offset : int
        Added to trajectory indices reported in :class:`IntegrationError`.

    Returns
    -------
    ndarray
        ``(B, n_times, m)`` states (``(n_times, m)`` for a single state).
    """
    cfg = config or IntegratorConfig()
    ts = np.asarray(times, dtype=np.float64).ravel()
    if ts.size == 0 or np.any(np.diff(ts) <= 0):
        raise ValueError("output times must be non-empty and strictly increasing")
    y = np.asarray(x0, dtype=np.float64)
    single = y.ndim == 1
    y = np.atleast_2d(y).copy()

    out = np.empty((y.shape[0], ts.size, y.shape[1]))
    out[:, 0] = y
    if ts.size == 1 or y.shape[0] == 0:
        return out[0] if single else out

    t = float(ts[0])
    k1 = np.asarray(f(t, y), dtype=np.float64)
    h = cfg.first_step or _initial_step(f, t, y, k1, cfg)
    err_prev = 1.0
    steps = accepted = 0
    next_out = 1
    worst = 0
    with np.errstate(all="ignore"):
        while next_out < ts.size:
            if steps >= cfg.max_steps:
                raise IntegrationError(
                    f"max_steps={cfg.max_steps} exceeded at t={t}", offset + worst
                )
            steps += 1
            target = float(ts[next_out])
            h_step = min(h, target - t)
            if h_step <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                raise IntegrationError(f"step size underflow at t={t}", offset + worst)

            ks = [k1]
            for i in range(1, 7):
                yi = y + h_step * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
                ks.append(np.asarray(f(t + _C[i] * h_step, yi), dtype=np.float64))
            y_new = y + h_step * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
            err = h_step * sum(e * k for e, k in zip(_E, ks))
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            norms = _rms(err, scale)
            norms = np.where(np.isfinite(norms), norms, np.inf)
            worst = int(np.argmax(norms))
            err_norm = float(norms[worst])

            if err_norm <= 1.0:
                accepted += 1
                t = target if h_step == target - t else t + h_step
                y, k1 = y_new, ks[6]
                if t == target:
                    out[:, next_out] = y
                    next_out += 1
                en = max(err_norm, 1e-10)
                factor = _SAFETY * en**-_ALPHA * err_prev**_BETA
                h = h_step * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                err_prev = en
            elif np.isfinite(err_norm):
                h = h_step * max(_MIN_FACTOR, _SAFETY * err_norm**-0.2)
            else:
                h = h_step * _MIN_FACTOR
    logger.debug(
        "integrated %d trajectories: %d steps (%d accepted)",
        y.shape[0],
        steps,
        accepted,
    )
    return out[0] if single else out


def integrate_with_logdensity(
    system: SystemSpec,
    x0: Any,
    times: Any,
    config: IntegratorConfig | None = None,
    *,
    offset: int = 0,
) -> CharacteristicEnsemble:
    """Transport states and log-densities along characteristics.

    The state is augmented with ``l = log p`` obeying ``dl/dt = -div f`` and
    ``l(t0) = log p0(x0)``.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    d = system.dim
    if x.shape[-1] != d:
        raise ValueError(f"initial states have {x.shape[-1]} coordinates, expected {d}")

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        xs = state[:, :d]
        dx = np.asarray(system.velocity(xs, t), dtype=np.float64)
        dl = -system.div_f(xs, t)
        return np.concatenate([dx, dl[:, None]], axis=-1)

    l0 = np.asarray(system.log_p0(x), dtype=np.float64)
    y0 = np.concatenate([x, l0[:, None]], axis=-1)
    sol = integrate(rhs, y0, times, config, offset=offset)
    return CharacteristicEnsemble(
        times=np.asarray(times, dtype=np.float64).ravel(),
        states=sol[..., :d],
        log_density=sol[..., d],
    )


def integrate_ensemble(
    system: SystemSpec,
    x0: Any,
    times: Any,
    config: IntegratorConfig | None = None,
    *,
    threads: int = 1,
    chunk_size: int = 1000,
) -> CharacteristicEnsemble:
    """Chunked :func:`integrate_with_logdensity` over a thread pool.

    Chunk boundaries depend only on ``chunk_size``; results are reassembled in
    chunk order, so the output is identical for any number of threads.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    if x.shape[0] == 0:
        return integrate_with_logdensity(system, x, times, config)
    starts = list(range(0, x.shape[0], chunk_size))

    def run(start: int) -> CharacteristicEnsemble:
        return integrate_with_logdensity(
            system, x[start : start + chunk_size], times, config, offset=start
        )

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    logger.info(
        "integrated %d characteristics of %s in %d chunk(s)",
        x.shape[0],
        system.name,
        len(parts),
    )
    return CharacteristicEnsemble(
        times=parts[0].times,
        states=np.concatenate([p.states for p in parts], axis=0),
        log_density=np.concatenate([p.log_density for p in parts], axis=0),
    )
