"""Piecewise-constant convex approximation of a control with values in a subspace."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.controls import ControlSignal, PiecewiseConstantSignal
from ..spectral import lattice
from ..spectral.fields import SpectralField

SUM_TOL = 1e-12


class FieldBasis:
    """Orthonormal list of fields with fast coordinate maps.

    Parameters
    ----------
    fields : list of SpectralField
        Must be orthonormal for the L2 inner product (checked).
    """

    def __init__(self, fields, tol: float = 1e-10):
        fields = list(fields)
        if not fields:
            raise ValueError("basis must be nonempty")
        self.fields = fields
        self.modes = lattice.union(*[f.modes for f in fields])
        self.Q = np.array([_real(f, self.modes) for f in fields])
        G = self.Q @ self.Q.T
        if np.abs(G - np.eye(len(fields))).max() > tol:
            raise ValueError("basis fields are not orthonormal")

    @classmethod
    def of(cls, S) -> "FieldBasis":
        """Basis of a subspace object, a :class:`FieldBasis` or a list of fields."""
        if isinstance(S, FieldBasis):
            return S
        if hasattr(S, "basis"):
            return cls(S.basis)
        return cls(S)

    def __len__(self):
        return len(self.fields)

    def coords(self, u: SpectralField) -> np.ndarray:
        return self.Q @ _real(u, self.modes)

    def combine(self, c) -> SpectralField:
        return SpectralField.from_real(self.modes, self.Q.T @ np.asarray(c, dtype=float), prune=False)


def _real(u, modes):
    d = u.dense(modes, strict=False)
    return np.sqrt(2.0) * np.concatenate([d.real.ravel(), d.imag.ravel()])


@dataclass
class PiecewiseConstantControl:
    """``eta_1(t) = sum_l c[l, r] vertices[l]`` on ``[t_r, t_{r+1})``, ``t_r = r T / s``.

    ``coefficients`` has shape ``(m, s)``: nonnegative with unit column sums.
    When built by :func:`pwc_approximate` the vertices are ``+-scale e_l``
    for the orthonormal :attr:`basis` ``e_1 .. e_d`` (``m = 2 d``, the first
    ``d`` carry the plus sign).
    """

    vertices: list
    s: int
    coefficients: np.ndarray
    T: float
    basis: FieldBasis | None = None
    scale: float = float("nan")
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.vertices) < 1:
            raise ValueError("need at least one vertex")
        if self.coefficients.shape != (len(self.vertices), self.s):
            raise ValueError("coefficients must have shape (vertices, s)")
        if np.any(self.coefficients < 0):
            raise ValueError("coefficients must be nonnegative")
        if np.abs(self.coefficients.sum(axis=0) - 1.0).max() > SUM_TOL:
            raise ValueError("coefficient columns must sum to one")

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.s + 1)

    def interval(self, t: float) -> int:
        return int(min(max(np.floor(t * self.s / self.T), 0), self.s - 1))

    def level(self, r: int) -> SpectralField:
        """The constant value on ``[t_r, t_{r+1})``."""
        c = self.coefficients[:, r]
        if self.basis is not None and self.m == 2 * len(self.basis):
            d = len(self.basis)
            return self.basis.combine(self.scale * (c[:d] - c[d:]))
        out = SpectralField.zero()
        for w, v in zip(c, self.vertices):
            if w:
                out = out + w * v
        return out

    def value(self, t: float) -> SpectralField:
        return self.level(self.interval(t))

    def to_signal(self) -> PiecewiseConstantSignal:
        pal = [self.level(r) for r in range(self.s)]
        return PiecewiseConstantSignal(self.grid, pal)

    def distance(self, other: "PiecewiseConstantControl") -> float:
        """``sum_l ||phi_l - psi_l||_inf`` for controls on the same vertices and grid."""
        if other.coefficients.shape != self.coefficients.shape:
            raise ValueError("controls must share vertices and grid")
        return float(np.abs(self.coefficients - other.coefficients).max(axis=1).sum())


def pwc_approximate(eta: ControlSignal, s: int, basis=None, oversample: int = 8, M: float | None = None) -> PiecewiseConstantControl:
    """Convex piecewise-constant approximation on ``s`` equal intervals.

    With coordinates ``xi_l(t) = <eta(t), e_l>`` in an orthonormal basis of
    ``d`` vectors and ``M = max_{l,t} |xi_l(t)|``, the vertices are
    ``+-d M e_l`` and on ``[t_r, t_{r+1})`` the weights are
    ``(1 +- xi_l(t_r) / M) / (2 d)``; they are nonnegative, sum to one and
    reproduce ``eta(t_r)`` exactly.

    Parameters
    ----------
    eta : ControlSignal
        Values must lie in the span of ``basis``.
    s : int
    basis : subspace, FieldBasis or list of orthonormal fields, optional
        Defaults to ``eta.subspace``.
    oversample : int
        ``M`` is the maximum over ``oversample`` points per interval in
        addition to the grid points.
    M : float, optional
        Override of the coordinate bound (must dominate the sampled one),
        for families of controls sharing vertices.
    """
    if s < 1:
        raise ValueError("s must be a positive integer")
    if basis is None:
        basis = eta.subspace
    if basis is None or (hasattr(basis, "dim") and basis.dim == 0):
        raise ValueError("a nonzero subspace (basis) is required")
    fb = FieldBasis.of(basis)
    d = len(fb)
    T = eta.T
    grid = np.linspace(0.0, T, s + 1)
    values = [eta.value(t) for t in grid[:-1]]
    xi = np.array([fb.coords(v) for v in values]).T  # (d, s)
    outside = max((v - fb.combine(x)).norm(0) for v, x in zip(values, xi.T))
    fine = [eta.value(t, "left" if t >= T else "right") for t in np.linspace(0.0, T, s * max(oversample, 1) + 1)]
    sampled = max([float(np.abs(xi).max(initial=0.0))] + [float(np.abs(fb.coords(v)).max()) for v in fine])
    if M is None:
        M = sampled
    elif M < float(np.abs(xi).max(initial=0.0)) * (1 - 1e-12):
        raise ValueError("M must dominate the grid coordinates")
    if M == 0:
        M = 1.0
    scale = d * M
    plus = (1.0 + xi / M) / (2 * d)
    minus = (1.0 - xi / M) / (2 * d)
    coeffs = np.clip(np.vstack([plus, minus]), 0.0, None)
    vertices = [scale * e for e in fb.fields] + [-scale * e for e in fb.fields]
    return PiecewiseConstantControl(vertices, s, coeffs, T, fb, scale, {"M": float(M), "d": d, "outside": float(outside)})
