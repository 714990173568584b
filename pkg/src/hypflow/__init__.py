"""Inverse curve shortening flow and its solitons in the hyperbolic upper half-plane."""

__version__ = "0.1.0"

from .conformal import conformal_curve, conformal_residual, integrate_conformal
from .exact_flows import ExactFlow, FlowKind, flow_residual, make_exact_flow
from .geometry import (
    CONFORMAL_VERTICAL,
    PARABOLIC,
    HPoint,
    PolyCurve,
    classify_constant_curvature,
    curvature_at,
    soliton_residual,
)
from .ode import StepControl, integrate
from .parabolic import OrbitType, find_threshold_H, integrate_orbit, reflect_orbit, soliton_curve
from .simulator import simulate, step_icsf, verify_soliton_translation

__all__ = [
    "CONFORMAL_VERTICAL",
    "PARABOLIC",
    "ExactFlow",
    "FlowKind",
    "HPoint",
    "OrbitType",
    "PolyCurve",
    "StepControl",
    "classify_constant_curvature",
    "conformal_curve",
    "conformal_residual",
    "curvature_at",
    "find_threshold_H",
    "flow_residual",
    "integrate",
    "integrate_conformal",
    "integrate_orbit",
    "make_exact_flow",
    "reflect_orbit",
    "simulate",
    "soliton_curve",
    "soliton_residual",
    "step_icsf",
    "verify_soliton_translation",
]
