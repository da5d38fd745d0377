"""AdamW with decoupled weight decay and a cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = ["AdamWState", "CosineSchedule", "adamw_step", "cosine_lr"]


@dataclass(frozen=True, eq=False)
class AdamWState:
    """Moment estimates and hyper-parameters of one AdamW run.

    Attributes
    ----------
    m, v : ndarray
        First and second moment estimates, shaped like the parameter vector.
    step : int
        Number of updates applied so far.
    lr : float
        Learning rate of the most recent update.
    """

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self) -> None:
        if self.m.shape != self.v.shape:
            raise ValueError("moment vectors must have the same shape")
        if self.step < 0:
            raise ValueError("step must be non-negative")

    @classmethod
    def zeros(
        cls,
        size: int,
        *,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ) -> AdamWState:
        """A fresh state with zero moments for ``size`` parameters."""
        return cls(
            m=np.zeros(size),
            v=np.zeros(size),
            lr=lr,
            beta1=betas[0],
            beta2=betas[1],
            eps=eps,
            weight_decay=weight_decay,
        )


def adamw_step(
    state: AdamWState,
    theta: np.ndarray,
    grad: np.ndarray,
    lr: float | None = None,
) -> tuple[np.ndarray, AdamWState]:
    """One bias-corrected AdamW update; returns new parameters and state.

    ``theta <- theta - lr * (weight_decay * theta + m_hat / (sqrt(v_hat) + eps))``
    with the decay applied to the parameters before this step.
    """
    if theta.shape != state.m.shape or grad.shape != state.m.shape:
        raise ValueError(
            f"parameters {theta.shape} and gradient {grad.shape} must match "
            f"the optimizer state {state.m.shape}"
        )
    lr = state.lr if lr is None else float(lr)
    b1, b2 = state.beta1, state.beta2
    step = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**step)
    v_hat = v / (1.0 - b2**step)
    decay = lr * state.weight_decay * theta
    new = theta - decay - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, step=step, lr=lr)


@dataclass(frozen=True)
class CosineSchedule:
    eta_max: float
    total_steps: int
    eta_min: float = 0.0

    def __post_init__(self) -> None:
        if self.total_steps <= 0:
            raise ValueError("total_steps must be positive")
        if not 0.0 <= self.eta_min <= self.eta_max:
            raise ValueError("need 0 <= eta_min <= eta_max")


def cosine_lr(schedule: CosineSchedule, step: int) -> float:
    """Learning rate after ``step`` updates; constant at ``eta_min`` past the end."""
    s = min(max(step, 0), schedule.total_steps)
    span = schedule.eta_max - schedule.eta_min
    phase = math.pi * s / schedule.total_steps
    return schedule.eta_min + span * (1.0 + math.cos(phase)) / 2.0
