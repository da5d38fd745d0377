"""CSV artifacts backed by pydantic row models."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TypeVar

import numpy as np
from pydantic import BaseModel

__all__ = ["read_rows", "write_matrix", "write_rows"]

R = TypeVar("R", bound=BaseModel)


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(
    path: str | Path,
    row_type: type[BaseModel],
    rows: Iterable[BaseModel],
    *,
    exclude: Sequence[str] = (),
) -> Path:
    """Write ``rows`` with a header taken from ``row_type``'s fields.

    Floats are written with ``repr`` so files are byte-identical across runs
    that produce identical values.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [name for name in row_type.model_fields if name not in exclude]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            data = row.model_dump()
            writer.writerow([_cell(data[c]) for c in columns])
    return path


def write_matrix(
    path: str | Path, columns: Sequence[str], values: np.ndarray
) -> Path:
    """Write a 2-D float array under a header, one record per row."""
    values = np.asarray(values, dtype=np.float64).reshape(-1, len(columns))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_cell(float(v)) for v in row] for row in values)
    return path


def read_rows(path: str | Path, row_type: type[R]) -> list[R]:
    """Parse a file written by :func:`write_rows` back into row models."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            row_type.model_validate({k: v for k, v in rec.items() if v != ""})
            for rec in reader
        ]
