"""Real-space evaluation on uniform grids, used as an independent oracle.

Everything here goes through ``numpy.fft`` and pointwise products, sharing no
code with the combinatorial convolution in :mod:`.convolution`.
"""

from __future__ import annotations

import numpy as np

from . import lattice
from .fields import ScalarSpectralField, SpectralField


def _full_spectrum(field, n: int) -> np.ndarray:
    """Dense FFT-ordered spectrum of a field (trailing component axis for vectors)."""
    tail = field.coeffs.shape[1:]
    spec = np.zeros((n, n, n) + tail, dtype=complex)
    if len(field):
        if 2 * int(lattice.linf_norm(field.modes).max()) >= n:
            raise ValueError("grid too coarse to represent the field")
        m = field.modes
        i, j, k = (m % n).T
        spec[i, j, k] = field.coeffs
        mi, mj, mk = ((-m) % n).T
        spec[mi, mj, mk] = np.conj(field.coeffs)
    return spec


def _to_grid(spec):
    n = spec.shape[0]
    return np.real(np.fft.ifftn(spec, axes=(0, 1, 2))) * n**3


def evaluate_on_grid(field, n: int) -> np.ndarray:
    """Values on the ``n^3`` grid ``x_j = 2 pi j / n``; shape ``(n, n, n)`` or ``(n, n, n, 3)``."""
    return _to_grid(_full_spectrum(field, n))


def _wavenumbers(n):
    k = np.fft.fftfreq(n, 1.0 / n)
    return np.meshgrid(k, k, k, indexing="ij")


def gradient_on_grid(field: SpectralField, n: int) -> np.ndarray:
    """``grad[..., i, j] = d_j u_i`` on the grid."""
    spec = _full_spectrum(field, n)
    ks = _wavenumbers(n)
    out = np.empty((n, n, n, 3, 3))
    for j in range(3):
        out[..., :, j] = _to_grid(1j * ks[j][..., None] * spec)
    return out


def grid_to_coeffs(values: np.ndarray, radius_linf: int):
    """Canonical coefficients (and mean) of grid samples up to l-infinity ``radius_linf``.

    Returns ``(modes, coeffs, mean)``.
    """
    n = values.shape[0]
    spec = np.fft.fftn(values, axes=(0, 1, 2)) / n**3
    modes = lattice.ball(radius_linf, "linf")
    i, j, k = (modes % n).T
    return modes, spec[i, j, k], spec[0, 0, 0]


def _check_resolution(n, out_linf):
    if n <= 2 * out_linf:
        raise ValueError(
            f"grid_res={n} violates the aliasing bound grid_res > 2*{out_linf}"
        )


def grid_oracle_advect(a: SpectralField, b: SpectralField, grid_res: int) -> dict:
    """Coefficients of ``(a . grad) b`` computed pointwise on a grid.

    The result is a raw mapping ``m -> complex 3-vector`` over canonical
    ``m`` (and ``(0, 0, 0)``); no projection is applied.

    Raises
    ------
    ValueError
        If ``grid_res <= 2 * (max l-infinity wavevector of the product)``.
    """
    la = int(lattice.linf_norm(a.modes).max()) if len(a) else 0
    lb = int(lattice.linf_norm(b.modes).max()) if len(b) else 0
    out_linf = la + lb
    _check_resolution(grid_res, out_linf)
    ua = evaluate_on_grid(a, grid_res)
    gb = gradient_on_grid(b, grid_res)
    adv = np.einsum("xyzj,xyzij->xyzi", ua, gb)
    modes, coeffs, mean = grid_to_coeffs(adv, max(out_linf, 1))
    out = {(0, 0, 0): mean}
    for m, c in zip(modes, coeffs):
        out[tuple(int(v) for v in m)] = c
    return out


def grid_gradient_product(u: SpectralField, v: SpectralField, grid_res: int) -> dict:
    """Coefficients of ``sum_ij d_j u_i d_i v_j`` computed on a grid (raw, with mean)."""
    lu = int(lattice.linf_norm(u.modes).max()) if len(u) else 0
    lv = int(lattice.linf_norm(v.modes).max()) if len(v) else 0
    out_linf = lu + lv
    _check_resolution(grid_res, out_linf)
    gu = gradient_on_grid(u, grid_res)
    gv = gradient_on_grid(v, grid_res)
    prod = np.einsum("xyzij,xyzji->xyz", gu, gv)
    modes, coeffs, mean = grid_to_coeffs(prod, max(out_linf, 1))
    out = {(0, 0, 0): mean}
    for m, c in zip(modes, coeffs):
        out[tuple(int(x) for x in m)] = c
    return out


def grid_divergence(field, grid_res: int) -> np.ndarray:
    """Pointwise divergence of a vector field on the grid."""
    return np.trace(gradient_on_grid(field, grid_res), axis1=-2, axis2=-1)


def scalar_from_raw(raw: dict) -> ScalarSpectralField:
    return ScalarSpectralField.from_raw(raw, drop_mean=True).prune()
