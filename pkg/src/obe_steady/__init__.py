"""Analytic steady states of Zeeman-degenerate two-level atoms in elliptically polarized light.

The analytic engine lives in :mod:`obe_steady.steadystate`; the numerical
Bloch-equation oracle used to check it is :mod:`obe_steady.gobe`.
"""
from .angular import AngularMomentum, clebsch_gordan, scaled_legendre, wigner6j, wigner_d_small
from .errors import (
    ConvergenceError,
    DarkStateError,
    NoDarkStateError,
    NonUniqueSteadyStateError,
    ObeSteadyError,
)
from .polarization import ComplexVector3, Frame, Polarization, polarization_from_ellipticity
from .steadystate import (
    DensityMatrix,
    FieldParams,
    SteadyStateResult,
    TransitionClass,
    TransitionSpec,
    classify,
    dark_subspace,
    excited_population,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "AngularMomentum",
    "ComplexVector3",
    "ConvergenceError",
    "DarkStateError",
    "DensityMatrix",
    "FieldParams",
    "Frame",
    "NoDarkStateError",
    "NonUniqueSteadyStateError",
    "ObeSteadyError",
    "Polarization",
    "SteadyStateResult",
    "TransitionClass",
    "TransitionSpec",
    "classify",
    "clebsch_gordan",
    "dark_subspace",
    "excited_population",
    "polarization_from_ellipticity",
    "scaled_legendre",
    "steady_state",
    "wigner6j",
    "wigner_d_small",
]
