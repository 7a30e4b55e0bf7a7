"""Linear and bilinear operators on spectral fields."""

from __future__ import annotations

import numpy as np

from . import lattice
from .convolution import get_plan
from .fields import PRUNE_TOL, ScalarSpectralField, SpectralField, _combine_raw, _raw_items

ZERO_MODE_TOL = 1e-12


def leray_project(raw) -> SpectralField:
    """Project arbitrary coefficients onto divergence-free, zero-mean fields.

    ``raw`` is a mapping ``m -> complex 3-vector`` or a ``(modes, coeffs)``
    pair; wavevectors need not be canonical and ``m = 0`` is allowed (it is
    dropped).
    """
    modes, coeffs = _raw_items(raw, (3,))
    modes, coeffs, _ = _combine_raw(modes, coeffs, (3,))
    return SpectralField._trusted(*_project_arrays(modes, coeffs)).prune()


def _project_arrays(modes, coeffs):
    if len(modes) == 0:
        return modes, coeffs
    m = modes.astype(float)
    msq = (m * m).sum(axis=1)
    proj = coeffs - m * (np.einsum("kj,kj->k", m, coeffs) / msq)[:, None]
    return modes, proj


def _field_from_product(modes, coeffs, scale_ref):
    """Leray-project, then prune relative to ``scale_ref`` (largest input product)."""
    modes, coeffs = _project_arrays(modes, coeffs)
    if len(modes) == 0:
        return SpectralField.zero()
    mag = np.abs(coeffs).max(axis=1)
    keep = mag > PRUNE_TOL * max(scale_ref, mag.max() if len(mag) else 0.0)
    return SpectralField._trusted(np.array(modes[keep]), np.array(coeffs[keep]))


def bilinear_B(a: SpectralField, b: SpectralField | None = None, out_modes=None) -> SpectralField:
    """``B(a, b)``: Leray projection of ``(a . grad) b``; ``B(a) = B(a, a)``.

    ``out_modes`` (sorted canonical) restricts the output, which is the
    Galerkin truncation ``P_M B``.  The mean of ``(a . grad) b`` vanishes for
    divergence-free ``a``; this is asserted.
    """
    if b is None:
        b = a
    if len(a) == 0 or len(b) == 0:
        return SpectralField.zero()
    plan = get_plan(a.modes, b.modes, out_modes)
    out, zero = plan.advect(a.coeffs, b.coeffs)
    scale = a.max_abs() * b.max_abs() * max(a.max_l1(), b.max_l1()) + 1e-300
    if np.abs(zero).max() > ZERO_MODE_TOL * scale * max(len(a), len(b)):
        raise AssertionError(f"advection mean does not vanish ({np.abs(zero).max():.3e})")
    return _field_from_product(plan.out_modes, out, scale)


def bilinear_B_sym(a: SpectralField, b: SpectralField, out_modes=None) -> SpectralField:
    """``B(a, b) + B(b, a)``."""
    return bilinear_B(a, b, out_modes) + bilinear_B(b, a, out_modes)


def sobolev_norm(u, k: float = 0.0) -> float:
    """Homogeneous Sobolev norm ``(sum_m 2 |m|_2^{2k} |u(m)|^2)^{1/2}``."""
    return u.norm(k)


def heat_semigroup(u, delta: float):
    """Apply ``exp(-delta |m|_2^2)`` mode by mode (works for vector and scalar fields)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative (backward heat flow is not supported)")
    if delta == 0 or len(u) == 0:
        return u
    factor = np.exp(-delta * lattice.l2_norm_sq(u.modes).astype(float))
    shape = (-1,) + (1,) * (u.coeffs.ndim - 1)
    return type(u)._trusted(u.modes, u.coeffs * factor.reshape(shape), u.cutoff_hint)


def laplacian(f):
    """Multiply mode ``m`` by ``-|m|_2^2``."""
    if len(f) == 0:
        return f
    factor = -lattice.l2_norm_sq(f.modes).astype(float)
    shape = (-1,) + (1,) * (f.coeffs.ndim - 1)
    return type(f)._trusted(f.modes, f.coeffs * factor.reshape(shape), f.cutoff_hint)


def inverse_laplacian(f):
    """Divide mode ``m`` by ``-|m|_2^2``.

    Accepts a :class:`ScalarSpectralField` (zero mean by construction) or a
    raw mapping, in which case a nonzero mean is rejected.
    """
    if not isinstance(f, (ScalarSpectralField, SpectralField)):
        f = ScalarSpectralField.from_raw(f)
    if len(f) == 0:
        return f
    factor = -1.0 / lattice.l2_norm_sq(f.modes).astype(float)
    shape = (-1,) + (1,) * (f.coeffs.ndim - 1)
    return type(f)._trusted(f.modes, f.coeffs * factor.reshape(shape), f.cutoff_hint)


def curl(u: SpectralField) -> SpectralField:
    """``rot u`` with coefficients ``i m x u(m)``."""
    if len(u) == 0:
        return u
    c = 1j * np.cross(u.modes.astype(float), u.coeffs)
    return SpectralField._trusted(u.modes, c).prune()


def divergence(raw) -> ScalarSpectralField:
    """Scalar field ``div w`` of an arbitrary (not necessarily solenoidal) raw field."""
    modes, coeffs = _raw_items(raw, (3,))
    modes, coeffs, _ = _combine_raw(modes, coeffs, (3,))
    if len(modes) == 0:
        return ScalarSpectralField.zero()
    c = 1j * np.einsum("kj,kj->k", modes.astype(float), coeffs)
    return ScalarSpectralField._trusted(modes, c).prune()


def gradient_product(u: SpectralField, v: SpectralField | None = None, out_modes=None) -> ScalarSpectralField:
    """``sum_ij d_j u_i d_i v_j`` with its mean dropped.

    ``out_modes`` restricts the output set.
    """
    if v is None:
        v = u
    if len(u) == 0 or len(v) == 0:
        return ScalarSpectralField.zero()
    plan = get_plan(u.modes, v.modes, out_modes)
    out, _ = plan.gradient_product(u.coeffs, v.coeffs)
    return ScalarSpectralField.from_dense(plan.out_modes, out, prune=True)


def scalar_product(f: ScalarSpectralField, g: ScalarSpectralField) -> ScalarSpectralField:
    """Pointwise product of two scalar fields with the mean dropped."""
    if len(f) == 0 or len(g) == 0:
        return ScalarSpectralField.zero()
    plan = get_plan(f.modes, g.modes)
    out, _ = plan.product(f.coeffs, g.coeffs)
    return ScalarSpectralField.from_dense(plan.out_modes, out, prune=True)
