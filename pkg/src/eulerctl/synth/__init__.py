"""Control synthesis: ansatz, convex approximation, relaxation and shift elimination."""

from .ansatz import ansatz_control, mollify_target, reduce_to_subspace, signal_norm_l1
from .cascade import (
    ProjectionResult,
    SynthesisContext,
    SynthesisParams,
    SynthesisReport,
    exact_projection_iterate,
    export_breakpoint_table,
    relax_stage,
    synthesize,
)
from .convexify import ConvexifiedForce, VertexCertifier, adapted_basis, convexify, principal_directions
from .eliminate import EliminatedControl, eliminate_zeta, smooth_shift
from .pwc import FieldBasis, PiecewiseConstantControl, pwc_approximate
from .relaxation import DefectCurve, Mixture, RelaxationSchedule, build_schedule, compute_relaxation_defect, relaxation_control

__all__ = [
    "ansatz_control",
    "mollify_target",
    "reduce_to_subspace",
    "signal_norm_l1",
    "ProjectionResult",
    "SynthesisContext",
    "SynthesisParams",
    "SynthesisReport",
    "exact_projection_iterate",
    "export_breakpoint_table",
    "relax_stage",
    "synthesize",
    "ConvexifiedForce",
    "VertexCertifier",
    "adapted_basis",
    "convexify",
    "principal_directions",
    "EliminatedControl",
    "eliminate_zeta",
    "smooth_shift",
    "FieldBasis",
    "PiecewiseConstantControl",
    "pwc_approximate",
    "DefectCurve",
    "Mixture",
    "RelaxationSchedule",
    "build_schedule",
    "compute_relaxation_defect",
    "relaxation_control",
]
