"""Removing the shift ``zeta`` from the control system by a change of unknown."""

from __future__ import annotations

import numpy as np

from ..sim.controls import (
    ControlSignal,
    PiecewiseConstantSignal,
    PolynomialSignal,
    RampedSignal,
    SumSignal,
    ZeroSignal,
    _smoothstep,
    _smoothstep_rate,
    as_signal,
)


class WindowedSignal(ControlSignal):
    """``chi(t) base(t)`` with a C^1 window rising on ``[0, w]`` and falling on ``[T - w, T]``."""

    def __init__(self, base: PolynomialSignal, width: float):
        super().__init__(base.T)
        if not 0 < width <= base.T / 2:
            raise ValueError("window width must lie in (0, T/2]")
        self.base = base
        self.width = float(width)
        self._rate = base.derivative()
        self.subspace = base.subspace

    def breakpoints(self):
        return np.array([0.0, self.width, self.T - self.width, self.T])

    def _chi(self, t):
        w, T = self.width, self.T
        if t < w:
            return _smoothstep(t / w), _smoothstep_rate(t / w) / w
        if t > T - w:
            return _smoothstep((T - t) / w), -_smoothstep_rate((T - t) / w) / w
        return 1.0, 0.0

    def value(self, t, side="right"):
        c, _ = self._chi(t)
        return c * self.base.value(t, side)

    def dense(self, t, modes, side="right"):
        c, _ = self._chi(t)
        return c * self.base.dense(t, modes, side)

    def derivative(self) -> ControlSignal:
        return _WindowRate(self)


class _WindowRate(ControlSignal):
    def __init__(self, win: WindowedSignal):
        super().__init__(win.T)
        self.win = win
        self.subspace = win.subspace

    def breakpoints(self):
        return self.win.breakpoints()

    def value(self, t, side="right"):
        c, dc = self.win._chi(t)
        out = c * self.win._rate.value(t, side)
        return out + dc * self.win.base.value(t, side) if dc else out

    def dense(self, t, modes, side="right"):
        c, dc = self.win._chi(t)
        return c * self.win._rate.dense(t, modes, side) + dc * self.win.base.dense(t, modes, side)


class EliminatedControl(SumSignal):
    """``eta + d zeta~ / dt`` together with the smoothed shift ``zeta~`` it absorbs."""

    def __init__(self, eta: ControlSignal, zeta_tilde: ControlSignal):
        super().__init__([eta, zeta_tilde.derivative()])
        self.eta = eta
        self.zeta_tilde = zeta_tilde
        self.subspace = eta.subspace


def smooth_shift(zeta: ControlSignal, ramp_width: float, pieces: int = 1, overlap: bool = False, shape: str = "cosine") -> ControlSignal:
    """C^1 version of ``zeta`` vanishing at ``0`` and ``T``.

    Piecewise-constant shifts get ramps of the given ``shape`` across every
    jump (overlapping ramps superpose when ``overlap`` is set); polynomial
    shifts are multiplied by a C^1 window of width ``ramp_width``.
    """
    if isinstance(zeta, PiecewiseConstantSignal):
        return RampedSignal(zeta, ramp_width, zero_ends=True, pieces=pieces, overlap=overlap, shape=shape)
    if isinstance(zeta, PolynomialSignal):
        return WindowedSignal(zeta, ramp_width)
    raise TypeError(f"cannot smooth a shift of type {type(zeta).__name__}")


def eliminate_zeta(eta: ControlSignal, zeta, ramp_width: float, pieces: int = 1, overlap: bool = False, shape: str = "cosine") -> ControlSignal:
    """Control ``eta + d zeta~/dt`` for the unshifted system.

    With ``zeta~ = smooth_shift(zeta)`` and ``w = u + zeta~`` the shifted
    equation ``u' + B(u + zeta~) = h + eta`` becomes
    ``w' + B(w) = h + eta + d zeta~/dt``, so
    ``R(u0, zeta~, h + eta) = R(u0, eta + d zeta~/dt, h) - zeta~`` along the
    whole trajectory; at ``t = T`` the two states coincide because
    ``zeta~(T) = 0``.  A zero shift returns ``eta`` itself.

    Raises
    ------
    ValueError
        If ``ramp_width`` exceeds the shortest constancy interval of a
        piecewise-constant ``zeta`` and ``overlap`` is False.
    """
    zeta = as_signal(zeta, eta.T)
    if isinstance(zeta, ZeroSignal):
        return eta
    return EliminatedControl(eta, smooth_shift(zeta, ramp_width, pieces, overlap, shape))
