"""Architecture configuration of a time-dependent KRnet."""

from __future__ import annotations

from typing import Annotated, ClassVar

from annotated_types import Interval
from pydantic import ConfigDict, BaseModel, Field, PositiveFloat, PositiveInt, model_validator
from typing_extensions import Self

__all__ = ["ArchitectureConfig", "partition_sizes"]


def partition_sizes(dim: int, num_blocks: int) -> list[int]:
    """Near-equal partition of ``dim`` coordinates, larger parts first.

    >>> partition_sizes(7, 3)
    [3, 2, 2]
    """
    if not 1 <= num_blocks <= dim:
        raise ValueError(f"cannot split {dim} coordinates into {num_blocks} blocks")
    q, r = divmod(dim, num_blocks)
    return [q + 1] * r + [q] * (num_blocks - r)


class ArchitectureConfig(BaseModel):
    """Layer structure and fixed hyperparameters of the flow."""

    model_config: ClassVar[ConfigDict] = {"extra": "forbid", "validate_assignment": True}

    num_blocks: PositiveInt = Field(
        default=1, description="Number K of triangular blocks (and partitions)"
    )
    pairs_per_block: PositiveInt = Field(
        default=4,
        description="Number L of (scale-bias, affine coupling) pairs per block",
    )
    hidden_width: PositiveInt = Field(
        default=32, description="Width d_h of the coupling networks (even)"
    )
    depth: PositiveInt = Field(
        default=3,
        description=(
            "Number M of fully connected layers in each coupling network, "
            "including the output layer"
        ),
    )
    nonlinear: bool = Field(
        default=True, description="Append the time-dependent nonlinear layer"
    )
    alpha: Annotated[float, Interval(gt=0, lt=1)] = Field(
        default=0.6, description="Fixed coupling scale hyperparameter"
    )
    mesh_size: PositiveInt = Field(
        default=32, description="Number of interior mesh nodes of the nonlinear layer"
    )
    bound: PositiveFloat = Field(
        default=50.0, description="Half-width a of the nonlinear layer's domain"
    )
    partitions: list[PositiveInt] | None = Field(
        default=None,
        description=(
            "Explicit partition sizes; a near-equal split (larger parts first) "
            "is used when omitted"
        ),
    )

    @model_validator(mode="after")
    def _validate_architecture(self) -> Self:
        if self.hidden_width % 2:
            raise ValueError(f"hidden_width must be even, got {self.hidden_width}")
        if self.partitions is not None and len(self.partitions) != self.num_blocks:
            raise ValueError(
                f"{len(self.partitions)} partition sizes given for "
                f"{self.num_blocks} blocks"
            )
        return self

    def resolve_partitions(self, dim: int) -> list[int]:
        """Partition sizes for a ``dim``-dimensional state."""
        if self.partitions is None:
            return partition_sizes(dim, self.num_blocks)
        if sum(self.partitions) != dim:
            raise ValueError(
                f"partition sizes {self.partitions} do not sum to dimension {dim}"
            )
        return list(self.partitions)
