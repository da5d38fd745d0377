"""Common types and enums used throughout tkrnet configurations."""

from __future__ import annotations

from enum import Enum
from typing import Annotated, Any, TypeAlias

import numpy as np
from pydantic import GetCoreSchemaHandler
from pydantic_core import core_schema

__all__ = [
    "ArrayValidator",
    "FloatArray",
    "LossVariant",
]


class ArrayValidator:
    """Pydantic-compatible float64 numpy array, serialized as nested lists."""

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source_type: Any, handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        def _serialize(val: np.ndarray) -> list:
            return val.tolist()  # type: ignore[no-any-return]

        def _validate_array(val: Any) -> np.ndarray:
            arr = np.asarray(val, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError("array contains non-finite entries")
            return arr

        ser_schema = core_schema.plain_serializer_function_ser_schema(
            _serialize, return_schema=core_schema.list_schema()
        )

        return core_schema.no_info_before_validator_function(
            _validate_array,
            core_schema.any_schema(),
            serialization=ser_schema,
        )


FloatArray: TypeAlias = Annotated[np.ndarray, ArrayValidator]


class LossVariant(str, Enum):
    """Residual used in the training loss.

    - ``log``: mean squared logarithmic Liouville residual (default).
    - ``plain``: mean squared Liouville residual ``r = p * r_log``.
    - ``ode``: mean squared characteristic residual of the inverse flow map.
    """

    LOG = "log"
    PLAIN = "plain"
    ODE = "ode"

    def __str__(self) -> str:
        return self.value
