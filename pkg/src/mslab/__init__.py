"""Numerical laboratory for nonlocal seminorm limits on metric measure spaces."""

from .asymptotics import (
    check_basepoint_independence,
    decomposition_diagnostic,
    estimate_avr,
    estimate_entropy,
    extrapolate,
    limit_study,
    sharpness_check,
)
from .errors import DivergenceError, MSLabError, NumericalError, StateError, UsageError
from .mollifiers import MollifierFamily, check_assumptions, predicted_L
from .quadrature import SamplingPlan, finiteness_gate, seminorm, tail_integral
from .spaces import Banach, Euclidean, Heisenberg, HyperbolicPlane, Sector, ball_volume, distance
from .testfn import TestFunction, make_test_function

__all__ = [
    "Banach",
    "DivergenceError",
    "Euclidean",
    "Heisenberg",
    "HyperbolicPlane",
    "MSLabError",
    "MollifierFamily",
    "NumericalError",
    "SamplingPlan",
    "Sector",
    "StateError",
    "TestFunction",
    "UsageError",
    "ball_volume",
    "check_assumptions",
    "check_basepoint_independence",
    "decomposition_diagnostic",
    "distance",
    "estimate_avr",
    "estimate_entropy",
    "extrapolate",
    "finiteness_gate",
    "make_test_function",
    "limit_study",
    "predicted_L",
    "seminorm",
    "sharpness_check",
    "tail_integral",
]
