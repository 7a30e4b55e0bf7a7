"""Fourier-space algebra for divergence-free fields on the 3-torus."""

from . import lattice
from .fields import (
    ScalarSpectralField,
    SpectralField,
    fiber_basis,
    mode_basis,
    random_field,
    random_scalar,
    scalar_trig,
    trig_mode,
)
from .frames import PolarizationFrame, canonical_frame, frame_vectors, polarization, rotated
from .grid import evaluate_on_grid, grid_gradient_product, grid_oracle_advect
from .operators import (
    bilinear_B,
    bilinear_B_sym,
    curl,
    divergence,
    gradient_product,
    heat_semigroup,
    inverse_laplacian,
    laplacian,
    leray_project,
    sobolev_norm,
)
from .subspace import ModeSubspace

__all__ = [
    "lattice",
    "ScalarSpectralField",
    "SpectralField",
    "fiber_basis",
    "mode_basis",
    "random_field",
    "random_scalar",
    "scalar_trig",
    "trig_mode",
    "PolarizationFrame",
    "canonical_frame",
    "frame_vectors",
    "polarization",
    "rotated",
    "evaluate_on_grid",
    "grid_gradient_product",
    "grid_oracle_advect",
    "bilinear_B",
    "bilinear_B_sym",
    "curl",
    "divergence",
    "gradient_product",
    "heat_semigroup",
    "inverse_laplacian",
    "laplacian",
    "leray_project",
    "sobolev_norm",
    "ModeSubspace",
]
