"""Numerical laboratory for the KdV flow on reflectionless potentials."""

__version__ = "0.1.0"

from . import errors
from .measures import (
    SolitonData,
    SpectralMeasure,
    delta_zeros,
    discretize_ac,
    empty_measure,
    empty_soliton,
    eval_delta,
    eval_m,
    moments,
    norming_constants,
)
from .soliton import dress, fredholm_potential, potential_eval

__all__ = [
    "errors",
    "SpectralMeasure",
    "SolitonData",
    "eval_m",
    "eval_delta",
    "delta_zeros",
    "norming_constants",
    "moments",
    "discretize_ac",
    "empty_measure",
    "empty_soliton",
    "potential_eval",
    "dress",
    "fredholm_potential",
]
