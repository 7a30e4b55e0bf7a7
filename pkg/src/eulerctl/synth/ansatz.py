"""Ansatz control along a straight path, its reduction to a subspace, and norms of signals."""

from __future__ import annotations

import math

import numpy as np

from ..sim.controls import (
    ConstantSignal,
    ControlSignal,
    PiecewiseConstantSignal,
    PolynomialSignal,
    ScaledSignal,
    SumSignal,
    ZeroSignal,
    as_signal,
)
from ..sim.integrator import GalerkinConfig, Trajectory, galerkin_system
from ..spectral import lattice
from ..spectral.fields import SpectralField
from ..spectral.operators import bilinear_B, bilinear_B_sym, heat_semigroup


def mollify_target(u_hat, delta: float):
    """Smoothed target ``exp(-delta L) u_hat``."""
    return heat_semigroup(u_hat, delta)


def ansatz_control(u0: SpectralField, u_hat: SpectralField, mu: float, delta: float, T: float, h, cfg: GalerkinConfig):
    """Straight path between smoothed endpoints and the force that drives it.

    The path is ``u(t) = ((T - t) a + t b) / T`` with ``a = exp(-delta L) u0``
    and ``b = exp(-mu L) u_hat``.  The control
    ``eta(t) = du/dt + P_M B(u(t)) - h(t)`` is exact: ``B(u(t))`` is a
    quadratic polynomial in ``t`` with coefficients computed once.

    Returns
    -------
    path : Trajectory
        The path sampled on the step grid of ``cfg``.
    eta : ControlSignal
    """
    if not (mu > 0 and delta > 0):
        raise ValueError("mu and delta must be positive")
    sys_ = galerkin_system(cfg.cutoff)
    modes = sys_.modes
    a = heat_semigroup(u0, delta)
    b = heat_semigroup(u_hat, mu)
    for name, f in (("u0", a), ("u_hat", b)):
        if len(f) and lattice.l1_norm(f.modes).max() > cfg.cutoff:
            raise ValueError(f"{name} is not supported in the cutoff ball")
    d = b - a
    # B(a + s d) = B(a) + s Bsym(a, d) + s^2 B(d), s = t / T
    Ba = bilinear_B(a, out_modes=modes)
    Bx = bilinear_B_sym(a, d, out_modes=modes)
    Bd = bilinear_B(d, out_modes=modes)
    poly = PolynomialSignal([(1.0 / T) * d + Ba, (1.0 / T) * Bx, (1.0 / T**2) * Bd], T)
    h = as_signal(h, T)
    eta = poly if isinstance(h, ZeroSignal) else SumSignal([poly, ScaledSignal(h, -1.0)])
    n = max(1, int(math.ceil(T / cfg.dt - 1e-9)))
    times = np.linspace(0.0, T, n + 1)
    ca, cd = a.dense(modes, strict=False), d.dense(modes, strict=False)
    coeffs = ca[None] + (times / T)[:, None, None] * cd[None]
    path = Trajectory(times, coeffs, modes, cfg, {"kind": "ansatz", "mu": mu, "delta": delta})
    return path, eta


class ProjectedSignal(ControlSignal):
    """Pointwise projection ``P_S eta(t)`` of an arbitrary signal."""

    def __init__(self, base: ControlSignal, S):
        super().__init__(base.T)
        self.base = base
        self.subspace = S

    def breakpoints(self):
        return self.base.breakpoints()

    def value(self, t, side="right"):
        return self.subspace.project(self.base.value(t, side))

    def constant_on(self, a, b):
        return self.base.constant_on(a, b)


def reduce_to_subspace(eta: ControlSignal, S) -> ControlSignal:
    """Time-pointwise projection of ``eta`` onto ``S``.

    Polynomial, constant, piecewise-constant, scaled and summed signals are
    projected structurally (coefficients or palette entries), anything else
    lazily at evaluation time.
    """
    if isinstance(eta, ZeroSignal):
        return eta
    if isinstance(eta, PolynomialSignal):
        return PolynomialSignal([S.project(c) for c in eta.coeffs], eta.T, S)
    if isinstance(eta, ConstantSignal):
        out = ConstantSignal(S.project(eta.field), eta.T)
        out.subspace = S
        return out
    if isinstance(eta, PiecewiseConstantSignal):
        return PiecewiseConstantSignal(eta.breakpoints(), [S.project(p) for p in eta.palette], eta.index, S)
    if isinstance(eta, ScaledSignal):
        out = ScaledSignal(reduce_to_subspace(eta.base, S), eta.scale)
        out.subspace = S
        return out
    if isinstance(eta, SumSignal):
        out = SumSignal([reduce_to_subspace(p, S) for p in eta.parts])
        out.subspace = S
        return out
    return ProjectedSignal(eta, S)


_GAUSS = np.polynomial.legendre.leggauss(4)


def signal_norm_l1(eta: ControlSignal, k: float, per_segment: int = 4) -> float:
    """``int_0^T ||eta(t)||_k dt`` by Gauss-Legendre on each smooth piece.

    Every interval between consecutive breakpoints is split into
    ``per_segment`` equal parts with a 4-point rule on each.
    """
    x, w = _GAUSS
    bp = np.asarray(eta.breakpoints(), dtype=float)
    total = 0.0
    for a, b in zip(bp[:-1], bp[1:]):
        edges = np.linspace(a, b, per_segment + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            for xi, wi in zip(x, w):
                total += half * wi * eta.value(mid + half * xi).norm(k)
    return float(total)
