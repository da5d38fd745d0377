"""Exact input derivatives and parameter gradients over numpy programs."""

from tkrnet._diff import ops
from tkrnet._diff.api import (
    directional_derivatives,
    material_derivative,
    nested_gradient,
    parameter_gradient,
)
from tkrnet._diff.bundle import TangentBundle
from tkrnet._diff.params import BoundParameters, ParameterStore, Segment
from tkrnet._diff.tape import AdjointProgram, Var

__all__ = [
    "AdjointProgram",
    "BoundParameters",
    "ParameterStore",
    "Segment",
    "TangentBundle",
    "Var",
    "directional_derivatives",
    "material_derivative",
    "nested_gradient",
    "ops",
    "parameter_gradient",
]
