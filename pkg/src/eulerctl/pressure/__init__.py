"""Pressure lift and combined velocity/pressure steering."""

from .lift import (
    LiftBlock,
    PressureTarget,
    WaveQuadruple,
    export_quadruples_csv,
    lift_blocks,
    lift_family,
    pressure_lift,
    quadratic_form_A,
    select_wavevectors,
    validate_quadruples,
)
from .steer import SteeringReport, a_lipschitz_constant, steer_velocity_pressure

__all__ = [
    "LiftBlock",
    "PressureTarget",
    "WaveQuadruple",
    "export_quadruples_csv",
    "lift_blocks",
    "lift_family",
    "pressure_lift",
    "quadratic_form_A",
    "select_wavevectors",
    "validate_quadruples",
    "SteeringReport",
    "a_lipschitz_constant",
    "steer_velocity_pressure",
]
