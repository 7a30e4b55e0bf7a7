"""Galerkin-truncated Euler integration with controls."""

from .controls import (
    ConstantSignal,
    ControlSignal,
    FunctionSignal,
    PiecewiseConstantSignal,
    PolynomialSignal,
    RampedSignal,
    SampledSignal,
    ScaledSignal,
    SumSignal,
    ZeroSignal,
    as_signal,
)
from .diagnostics import LipschitzReport, export_trajectory, lipschitz_probe, pressure_recover, vorticity_sup
from .integrator import BlowUpError, GalerkinConfig, GalerkinSystem, Trajectory, galerkin_system, resolve, resolve_controlled

__all__ = [
    "ConstantSignal",
    "ControlSignal",
    "FunctionSignal",
    "PiecewiseConstantSignal",
    "PolynomialSignal",
    "RampedSignal",
    "SampledSignal",
    "ScaledSignal",
    "SumSignal",
    "ZeroSignal",
    "as_signal",
    "LipschitzReport",
    "export_trajectory",
    "lipschitz_probe",
    "pressure_recover",
    "vorticity_sup",
    "BlowUpError",
    "GalerkinConfig",
    "GalerkinSystem",
    "Trajectory",
    "galerkin_system",
    "resolve",
    "resolve_controlled",
]
