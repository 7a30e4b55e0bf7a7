"""Sparse spectral representations of real fields on the torus T^3 = R^3 / 2piZ^3.

A field is stored as coefficients on canonical wavevectors only; the physical
field is ``sum_m 2 Re(c(m) exp(i<m, x>))`` over the stored ``m``.  With this
convention the L2 inner product (volume factor ``(2pi)^3`` dropped) is
``<u, v> = sum_m 2 Re(c_u(m) . conj(c_v(m)))``.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from . import lattice
from .frames import frame_vectors, polarization

DIV_TOL = 1e-12
PRUNE_TOL = 1e-14


def _combine_raw(modes, coeffs, tail):
    """Fold arbitrary (m, c) pairs onto canonical storage.

    Entries at ``-m`` contribute ``conj(c)`` to the canonical ``m`` so the
    physical field ``sum 2Re(c e^{imx})`` is unchanged.  Returns the zero-mode
    coefficient separately.
    """
    modes = lattice.as_modes(modes)
    coeffs = np.asarray(coeffs, dtype=complex).reshape((len(modes),) + tail)
    zero = lattice.is_zero(modes)
    zero_coeff = coeffs[zero].sum(axis=0) if np.any(zero) else np.zeros(tail, dtype=complex)
    modes, coeffs = modes[~zero], coeffs[~zero]
    canon, flip = lattice.canonicalize(modes)
    coeffs = np.where(flip.reshape((-1,) + (1,) * len(tail)), np.conj(coeffs), coeffs)
    k = lattice.keys(canon)
    uk, inv = np.unique(k, return_inverse=True)
    out = np.zeros((len(uk),) + tail, dtype=complex)
    np.add.at(out, inv, coeffs)
    return lattice.from_keys(uk), out, zero_coeff


def _raw_items(raw, tail):
    if isinstance(raw, _SparseField):
        return raw.modes, raw.coeffs
    if isinstance(raw, Mapping):
        if not raw:
            return lattice.EMPTY_MODES, np.zeros((0,) + tail, dtype=complex)
        modes = np.array([tuple(m) for m in raw.keys()], dtype=np.int64)
        coeffs = np.array([np.asarray(v, dtype=complex) for v in raw.values()])
        return modes, coeffs.reshape((len(modes),) + tail)
    modes, coeffs = raw
    return lattice.as_modes(modes), np.asarray(coeffs, dtype=complex)


class _SparseField:
    _tail: tuple = ()
    kind = ""

    __slots__ = ("_modes", "_coeffs", "cutoff_hint")

    def __init__(self, modes, coeffs, cutoff_hint=None):
        modes = lattice.as_modes(modes)
        coeffs = np.asarray(coeffs, dtype=complex).reshape((len(modes),) + self._tail)
        if len(modes):
            if np.any(lattice.is_zero(modes)):
                raise ValueError("zero-mean field: the m = 0 coefficient must be absent")
            if not np.all(lattice.is_canonical(modes)):
                raise ValueError("modes must be canonical; use from_raw for general input")
            k = lattice.keys(modes)
            if np.any(np.diff(k) <= 0):
                order = np.argsort(k, kind="stable")
                if np.any(np.diff(k[order]) == 0):
                    raise ValueError("duplicate wavevectors")
                modes, coeffs = modes[order], coeffs[order]
        modes = np.array(modes)
        coeffs = np.array(coeffs)
        modes.setflags(write=False)
        coeffs.setflags(write=False)
        self._modes = modes
        self._coeffs = coeffs
        self.cutoff_hint = cutoff_hint

    @classmethod
    def _trusted(cls, modes, coeffs, cutoff_hint=None):
        obj = cls.__new__(cls)
        modes = np.asarray(modes)
        coeffs = np.asarray(coeffs)
        modes.setflags(write=False)
        coeffs.setflags(write=False)
        obj._modes = modes
        obj._coeffs = coeffs
        obj.cutoff_hint = cutoff_hint
        return obj

    @classmethod
    def zero(cls):
        return cls._trusted(lattice.EMPTY_MODES.copy(), np.zeros((0,) + cls._tail, dtype=complex))

    @property
    def modes(self) -> np.ndarray:
        return self._modes

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    def __len__(self):
        return len(self._modes)

    def __repr__(self):
        return f"{type(self).__name__}(support={len(self)}, l2={self.norm(0):.6g})"

    # -- alignment ---------------------------------------------------------

    def dense(self, modes, strict: bool = True) -> np.ndarray:
        """Coefficients on the sorted canonical mode set ``modes``."""
        modes = lattice.as_modes(modes)
        out = np.zeros((len(modes),) + self._tail, dtype=complex)
        if len(self):
            idx = lattice.lookup(modes, self._modes)
            missing = idx < 0
            if np.any(missing):
                if strict and np.any(np.abs(self._coeffs[missing]) > 0):
                    raise ValueError("field support is not contained in the target mode set")
            out[idx[~missing]] = self._coeffs[~missing]
        return out

    @classmethod
    def from_dense(cls, modes, coeffs, prune: bool = False, cutoff_hint=None):
        modes = lattice.as_modes(modes)
        coeffs = np.asarray(coeffs, dtype=complex).reshape((len(modes),) + cls._tail)
        keep = np.ones(len(modes), dtype=bool)
        if prune:
            keep = _nonzero_rows(coeffs, PRUNE_TOL)
        else:
            keep = _nonzero_rows(coeffs, 0.0)
        return cls._trusted(np.array(modes[keep]), np.array(coeffs[keep]), cutoff_hint)

    def _binary(self, other, op):
        if type(other) is not type(self):
            return NotImplemented
        if len(self) == len(other) and np.array_equal(self._modes, other._modes):
            return type(self)._trusted(self._modes, op(self._coeffs, other._coeffs))
        modes = lattice.union(self._modes, other._modes)
        return type(self)._trusted(modes, op(self.dense(modes), other.dense(modes)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return type(self)._trusted(self._modes, -self._coeffs, self.cutoff_hint)

    def __mul__(self, scalar):
        if not np.isscalar(scalar) or np.iscomplexobj(scalar):
            return NotImplemented
        return type(self)._trusted(self._modes, float(scalar) * self._coeffs, self.cutoff_hint)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    # -- geometry ----------------------------------------------------------

    def inner(self, other) -> float:
        """L2 inner product (volume factor dropped)."""
        if len(self) == 0 or len(other) == 0:
            return 0.0
        idx = lattice.lookup(other._modes, self._modes)
        hit = idx >= 0
        a = self._coeffs[hit]
        b = other._coeffs[idx[hit]]
        return float(2.0 * np.real(np.sum(a * np.conj(b))))

    def weights(self, k: float) -> np.ndarray:
        return lattice.l2_norm_sq(self._modes).astype(float) ** k

    def norm(self, k: float = 0.0) -> float:
        """Homogeneous Sobolev norm ``(sum 2|m|^{2k}|c(m)|^2)^{1/2}``."""
        if k < 0:
            raise ValueError("Sobolev order must be nonnegative")
        if len(self) == 0:
            return 0.0
        mag = np.abs(self._coeffs) ** 2
        if mag.ndim > 1:
            mag = mag.sum(axis=tuple(range(1, mag.ndim)))
        return float(np.sqrt(2.0 * np.sum(self.weights(k) * mag)))

    def restrict(self, modes):
        """Keep only coefficients whose wavevector lies in ``modes``."""
        idx = lattice.lookup(lattice.sort_modes(modes), self._modes)
        keep = idx >= 0
        return type(self)._trusted(self._modes[keep], self._coeffs[keep], self.cutoff_hint)

    def truncate(self, radius: int, norm: str = "l1"):
        """Restrict to the ball ``|m| <= radius``."""
        if norm == "l1":
            size = lattice.l1_norm(self._modes)
        elif norm == "linf":
            size = lattice.linf_norm(self._modes)
        else:
            size = np.sqrt(lattice.l2_norm_sq(self._modes))
        keep = size <= radius
        return type(self)._trusted(self._modes[keep], self._coeffs[keep], radius)

    def prune(self, rel_tol: float = PRUNE_TOL):
        if len(self) == 0:
            return self
        keep = _nonzero_rows(self._coeffs, rel_tol)
        if np.all(keep):
            return self
        return type(self)._trusted(self._modes[keep], self._coeffs[keep], self.cutoff_hint)

    def max_l1(self) -> int:
        return int(lattice.l1_norm(self._modes).max()) if len(self) else 0

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def max_abs(self) -> float:
        return float(np.abs(self._coeffs).max()) if len(self) else 0.0

    # -- real coordinates ---------------------------------------------------

    def to_real(self, modes) -> np.ndarray:
        """Real coordinates on ``modes`` whose Euclidean dot is the L2 inner product."""
        d = self.dense(modes)
        return np.sqrt(2.0) * np.concatenate([d.real.ravel(), d.imag.ravel()])

    @classmethod
    def from_real(cls, modes, x, prune: bool = True):
        modes = lattice.as_modes(modes)
        x = np.asarray(x, dtype=float) / np.sqrt(2.0)
        half = x.size // 2
        c = (x[:half] + 1j * x[half:]).reshape((len(modes),) + cls._tail)
        return cls.from_dense(modes, c, prune=prune)

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in m): np.array(c) for m, c in zip(self._modes, self._coeffs)}


def _nonzero_rows(coeffs, rel_tol):
    if len(coeffs) == 0:
        return np.zeros(0, dtype=bool)
    mag = np.abs(coeffs)
    if mag.ndim > 1:
        mag = mag.max(axis=tuple(range(1, mag.ndim)))
    top = mag.max()
    if top == 0:
        return np.zeros(len(coeffs), dtype=bool)
    return mag > rel_tol * top


class SpectralField(_SparseField):
    """Zero-mean, divergence-free real vector field on T^3.

    Coefficients are complex 3-vectors on canonical wavevectors.  Instances
    are immutable; arithmetic returns new fields.
    """

    __slots__ = ()
    _tail = (3,)
    kind = "vector"

    def __init__(self, modes, coeffs, cutoff_hint=None, check: bool = True):
        super().__init__(modes, coeffs, cutoff_hint)
        if check:
            div = self.divergence_residual()
            if div > DIV_TOL:
                raise ValueError(f"field is not divergence-free (residual {div:.3e})")

    @classmethod
    def from_raw(cls, raw, check: bool = True, cutoff_hint=None):
        """Build from a mapping or ``(modes, coeffs)`` with arbitrary wavevectors.

        Entries at non-canonical ``m`` are folded onto ``-m``.  A nonzero
        mean is rejected.
        """
        modes, coeffs = _raw_items(raw, cls._tail)
        modes, coeffs, zero = _combine_raw(modes, coeffs, cls._tail)
        if np.any(np.abs(zero) > 0):
            raise ValueError("field has a nonzero mean")
        return cls(modes, coeffs, cutoff_hint=cutoff_hint, check=check)

    def divergence_residual(self) -> float:
        """max |<m, c(m)>| / |m|, relative to the largest coefficient."""
        if len(self) == 0:
            return 0.0
        m = self._modes.astype(float)
        div = np.abs(np.einsum("kj,kj->k", m, self._coeffs)) / np.linalg.norm(m, axis=1)
        scale = self.max_abs()
        return float(div.max() / scale) if scale > 0 else 0.0

    def evaluate(self, x) -> np.ndarray:
        """Physical values at points ``x`` of shape ``(N, 3)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self) == 0:
            return np.zeros((len(x), 3))
        phase = np.exp(1j * x @ self._modes.T.astype(float))
        return 2.0 * np.real(phase @ self._coeffs)


class ScalarSpectralField(_SparseField):
    """Zero-mean real scalar field on T^3 (pressure-like quantities)."""

    __slots__ = ()
    _tail = ()
    kind = "scalar"

    @classmethod
    def from_raw(cls, raw, drop_mean: bool = False, cutoff_hint=None):
        modes, coeffs = _raw_items(raw, cls._tail)
        modes, coeffs, zero = _combine_raw(modes, coeffs, cls._tail)
        if abs(zero) > 0 and not drop_mean:
            raise ValueError("field has a nonzero mean")
        return cls(modes, coeffs, cutoff_hint=cutoff_hint)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self) == 0:
            return np.zeros(len(x))
        phase = np.exp(1j * x @ self._modes.T.astype(float))
        return 2.0 * np.real(phase @ self._coeffs)

    def sin_cos(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients ``(C, D)`` in ``sum C sin<n,x> + D cos<n,x>``."""
        return -2.0 * self._coeffs.imag, 2.0 * self._coeffs.real


# -- elementary modes --------------------------------------------------------


def _trig_coeff(m, kind):
    m = np.asarray(m, dtype=np.int64).reshape(3)
    canonical = bool(lattice.is_canonical(m[None])[0])
    c = m if canonical else -m
    if kind == "cos":
        coeff = 0.5
    elif kind == "sin":
        coeff = -0.5j if canonical else 0.5j
    else:
        raise ValueError("kind must be 'cos' or 'sin'")
    return c, coeff


def trig_mode(m, kind: str = "cos", vector=None, amplitude: float = 1.0) -> SpectralField:
    """``amplitude * l cos<m,x>`` or ``amplitude * l sin<m,x>``.

    ``l`` defaults to the polarization ``l(m)`` of the canonical frame; a
    custom ``vector`` must be orthogonal to ``m``.
    """
    m = np.asarray(m, dtype=np.int64).reshape(3)
    if not np.any(m):
        raise ValueError("zero wavevector")
    l = polarization(m) if vector is None else np.asarray(vector, dtype=float)
    c, coeff = _trig_coeff(m, kind)
    return SpectralField(c[None], (amplitude * coeff * l)[None])


def fiber_basis(m) -> list[SpectralField]:
    """``[c_m, s_m, c_{-m}, s_{-m}]`` for the canonical representative of m."""
    c, _ = lattice.canonicalize(np.asarray(m, dtype=np.int64).reshape(1, 3))
    c = c[0]
    return [trig_mode(c, "cos"), trig_mode(c, "sin"), trig_mode(-c, "cos"), trig_mode(-c, "sin")]


def mode_basis(modes) -> list[SpectralField]:
    """Concatenated fiber bases over canonical ``modes`` (4 fields per mode)."""
    out = []
    for m in lattice.as_modes(modes):
        out.extend(fiber_basis(m))
    return out


def scalar_trig(n, kind: str = "cos", amplitude: float = 1.0) -> ScalarSpectralField:
    n = np.asarray(n, dtype=np.int64).reshape(3)
    c, coeff = _trig_coeff(n, kind)
    return ScalarSpectralField(c[None], np.array([amplitude * coeff]))


def random_field(modes, rng, scale: float = 1.0) -> SpectralField:
    """Gaussian divergence-free field on canonical ``modes`` (both polarizations)."""
    modes = lattice.sort_modes(modes)
    lp, lm = frame_vectors(modes)
    a = rng.standard_normal((len(modes), 2)) + 1j * rng.standard_normal((len(modes), 2))
    coeffs = scale * (a[:, :1] * lp + a[:, 1:] * lm)
    return SpectralField(modes, coeffs)


def random_scalar(modes, rng, scale: float = 1.0) -> ScalarSpectralField:
    modes = lattice.sort_modes(modes)
    a = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    return ScalarSpectralField(modes, scale * a)
