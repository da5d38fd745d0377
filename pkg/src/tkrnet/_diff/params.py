"""Flat trainable parameter vector with named segments and frozen buffers."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from math import prod
from typing import Any

import numpy as np

from tkrnet._diff.tape import AdjointProgram, Var
from tkrnet._errors import TrainingError

__all__ = ["BoundParameters", "ParameterStore", "Segment"]


@dataclass(frozen=True)
class Segment:
    """Location of one named parameter inside the flat vector."""

    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return prod(self.shape)

    @property
    def stop(self) -> int:
        return self.offset + self.size


class ParameterStore:
    """Trainable parameters stored contiguously, plus non-trainable buffers.

    Only the flat :attr:`vector` is seen by the optimizer; buffers (random
    Fourier matrices, phases) never receive gradients or weight decay.
    """

    def __init__(self) -> None:
        self._segments: dict[str, Segment] = {}
        self._vector = np.zeros(0)
        self._buffers: dict[str, np.ndarray] = {}

    def __repr__(self) -> str:
        return (
            f"ParameterStore(segments={len(self._segments)}, size={self.size}, "
            f"buffers={len(self._buffers)})"
        )

    def __contains__(self, name: object) -> bool:
        return name in self._segments or name in self._buffers

    # construction ------------------------------------------------------------

    def add(self, name: str, value: Any) -> None:
        """Append a trainable segment initialized to ``value``."""
        if name in self:
            raise KeyError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64)
        self._segments[name] = Segment(name, self.size, arr.shape)
        self._vector = np.concatenate([self._vector, arr.ravel()])

    def add_buffer(self, name: str, value: Any) -> None:
        """Register a frozen array under ``name``."""
        if name in self:
            raise KeyError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64)
        arr.setflags(write=False)
        self._buffers[name] = arr

    # access ------------------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self._vector.size)

    @property
    def vector(self) -> np.ndarray:
        """The flat trainable vector (a live reference)."""
        return self._vector

    @property
    def segments(self) -> tuple[Segment, ...]:
        return tuple(self._segments.values())

    @property
    def segment_names(self) -> tuple[str, ...]:
        return tuple(self._segments)

    @property
    def buffers(self) -> dict[str, np.ndarray]:
        return dict(self._buffers)

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def load_vector(self, vector: Any) -> None:
        """Replace the trainable values with a copy of ``vector``."""
        arr = np.array(vector, dtype=np.float64).ravel()
        if arr.size != self.size:
            raise ValueError(
                f"parameter vector has {arr.size} entries, expected {self.size}"
            )
        self._vector = arr

    def load_buffers(self, buffers: Mapping[str, Any]) -> None:
        for name, value in buffers.items():
            if name not in self._buffers:
                raise KeyError(f"unknown buffer {name!r}")
            arr = np.array(value, dtype=np.float64)
            if arr.shape != self._buffers[name].shape:
                raise ValueError(
                    f"buffer {name!r} has shape {arr.shape}, "
                    f"expected {self._buffers[name].shape}"
                )
            arr.setflags(write=False)
            self._buffers[name] = arr

    def view(self) -> dict[str, np.ndarray]:
        """Reshaped views into the flat vector, keyed by segment name."""
        v = self._vector
        return {
            s.name: v[s.offset : s.stop].reshape(s.shape)
            for s in self._segments.values()
        }

    def bind(self, program: AdjointProgram) -> BoundParameters:
        """Register every segment as a leaf of ``program``."""
        leaves = {
            name: program.leaf(value, name) for name, value in self.view().items()
        }
        return BoundParameters(self, program, leaves)

    def gradient(
        self, bound: BoundParameters, grads: Mapping[Var, np.ndarray]
    ) -> np.ndarray:
        """Scatter per-leaf gradients of ``bound`` into a flat vector.

        Segments without an entry in ``grads`` get zeros.  Raises
        :class:`~tkrnet.TrainingError` naming the first segment whose
        gradient is not finite.
        """
        flat = np.zeros(self.size)
        for seg in self._segments.values():
            g = grads.get(bound[seg.name])
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient", segment=seg.name)
            flat[seg.offset : seg.stop] = np.asarray(g).ravel()
        return flat

    def copy(self) -> ParameterStore:
        new = ParameterStore()
        new._segments = dict(self._segments)
        new._vector = self._vector.copy()
        new._buffers = dict(self._buffers)
        return new


class BoundParameters(Mapping[str, Var]):
    """A store's segments as leaves of one adjoint program."""

    def __init__(
        self, store: ParameterStore, program: AdjointProgram, leaves: dict[str, Var]
    ) -> None:
        self.store = store
        self.program = program
        self._leaves = leaves

    def __getitem__(self, name: str) -> Var:
        return self._leaves[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._leaves)

    def __len__(self) -> int:
        return len(self._leaves)
