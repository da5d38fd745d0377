"""Exception hierarchy for tkrnet."""

from __future__ import annotations

__all__ = [
    "CheckpointError",
    "DomainError",
    "EvaluationError",
    "FlowError",
    "IntegrationError",
    "TKRnetError",
    "TrainingError",
]


class TKRnetError(Exception):
    """Base class for all tkrnet errors."""


class EvaluationError(TKRnetError, ArithmeticError):
    """A recorded operation produced a non-finite value."""

    def __init__(self, op_index: int, op_name: str) -> None:
        self.op_index = op_index
        self.op_name = op_name
        super().__init__(
            f"non-finite value produced by operation #{op_index} ({op_name})"
        )


class TrainingError(TKRnetError):
    """Non-finite loss or gradient during optimization.

    Carries whichever coordinates were known where the failure was detected:
    the parameter segment holding the bad gradient entry and/or the
    (adaptivity iteration, epoch, batch) position inside the training loop.
    """

    def __init__(
        self,
        message: str,
        *,
        segment: str | None = None,
        adapt_iter: int | None = None,
        epoch: int | None = None,
        batch: int | None = None,
    ) -> None:
        self.message = message
        self.segment = segment
        self.adapt_iter = adapt_iter
        self.epoch = epoch
        self.batch = batch
        where = []
        if segment is not None:
            where.append(f"segment={segment!r}")
        if adapt_iter is not None:
            where.append(f"adapt_iter={adapt_iter}")
        if epoch is not None:
            where.append(f"epoch={epoch}")
        if batch is not None:
            where.append(f"batch={batch}")
        suffix = f" [{', '.join(where)}]" if where else ""
        super().__init__(f"{message}{suffix}")


class IntegrationError(TKRnetError):
    """The ODE integrator could not advance a trajectory."""

    def __init__(self, message: str, trajectory: int) -> None:
        self.trajectory = trajectory
        super().__init__(f"{message} (trajectory {trajectory})")


class DomainError(TKRnetError, ValueError):
    """Input outside the domain an operation is defined on."""


class FlowError(TKRnetError):
    """Internal failure inside a flow layer."""


class CheckpointError(TKRnetError):
    """A checkpoint file is missing or cannot be decoded."""
