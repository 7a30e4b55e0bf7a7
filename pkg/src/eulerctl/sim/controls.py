"""Time-dependent field-valued signals used as controls and forcing.

Every signal lives on a horizon ``[0, T]`` and exposes

* ``value(t, side)``: the field at ``t``; ``side`` picks the one-sided limit
  at a discontinuity (``"right"`` by default, ``"left"`` at the horizon end);
* ``breakpoints()``: times where the signal may fail to be smooth, always
  including ``0`` and ``T``;
* ``dense(t, modes, side)``: coefficients on a fixed mode set, cached for
  the integrator's inner loop.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right

import numpy as np

from ..spectral import lattice
from ..spectral.fields import SpectralField


class ControlSignal:
    """Base class; subclasses implement :meth:`value` and :meth:`breakpoints`."""

    subspace = None

    def __init__(self, T: float):
        if not T > 0:
            raise ValueError("horizon must be positive")
        self.T = float(T)

    def value(self, t: float, side: str = "right") -> SpectralField:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        return np.array([0.0, self.T])

    def dense(self, t: float, modes, side: str = "right") -> np.ndarray:
        return self.value(t, side).dense(modes, strict=False)

    def constant_on(self, a: float, b: float) -> bool:
        """True if the signal is constant on the open interval ``(a, b)``."""
        return False

    def sample(self, times) -> list:
        return [self.value(t, "left" if t >= self.T else "right") for t in times]

    def __add__(self, other):
        return SumSignal([self, other])

    def __neg__(self):
        return ScaledSignal(self, -1.0)

    def __sub__(self, other):
        return SumSignal([self, ScaledSignal(other, -1.0)])

    def _check_time(self, t):
        if t < -1e-12 or t > self.T + 1e-12:
            raise ValueError(f"time {t} outside the horizon [0, {self.T}]")


class ZeroSignal(ControlSignal):
    """Identically zero signal."""

    def value(self, t, side="right"):
        return SpectralField.zero()

    def dense(self, t, modes, side="right"):
        return np.zeros((len(modes), 3), dtype=complex)

    def constant_on(self, a, b):
        return True


class ConstantSignal(ControlSignal):
    def __init__(self, field: SpectralField, T: float):
        super().__init__(T)
        self.field = field
        self._cache = {}

    def value(self, t, side="right"):
        return self.field

    def dense(self, t, modes, side="right"):
        key = modes.tobytes()
        if key not in self._cache:
            self._cache[key] = self.field.dense(modes, strict=False)
        return self._cache[key]

    def constant_on(self, a, b):
        return True


class PiecewiseConstantSignal(ControlSignal):
    """Piecewise-constant signal with values drawn from a palette.

    Parameters
    ----------
    breakpoints : (K+1,) increasing array with ``breakpoints[0] = 0``
    palette : list of SpectralField
    index : (K,) int array, palette entry used on ``[b_k, b_{k+1})``
    """

    def __init__(self, breakpoints, palette, index=None, subspace=None):
        b = np.asarray(breakpoints, dtype=float)
        super().__init__(b[-1])
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        palette = list(palette)
        if index is None:
            index = np.arange(len(palette))
        index = np.asarray(index, dtype=np.int64)
        if len(index) != len(b) - 1:
            raise ValueError("need one value per interval")
        self._b = b
        self._blist = b.tolist()
        self.palette = palette
        self.index = index
        self.subspace = subspace
        self._dense = {}

    @classmethod
    def from_values(cls, breakpoints, values, subspace=None):
        return cls(breakpoints, values, np.arange(len(values)), subspace)

    def breakpoints(self):
        return self._b

    def interval(self, t, side="right") -> int:
        self._check_time(t)
        k = bisect_right(self._blist, t) - 1
        if side == "left" and k > 0 and t == self._blist[k]:
            k -= 1
        return int(min(max(k, 0), len(self.index) - 1))

    def value(self, t, side="right"):
        return self.palette[self.index[self.interval(t, side)]]

    def dense(self, t, modes, side="right"):
        key = modes.tobytes()
        table = self._dense.get(key)
        if table is None:
            table = np.array([p.dense(modes, strict=False) for p in self.palette]).reshape(
                len(self.palette), len(modes), 3
            )
            self._dense[key] = table
        return table[self.index[self.interval(t, side)]]

    def constant_on(self, a, b):
        return self.interval(a, "right") == self.interval(b, "left")

    def time_at(self) -> dict:
        """Total time spent at each palette index."""
        out = {}
        lengths = np.diff(self._b)
        for k, L in zip(self.index, lengths):
            out[int(k)] = out.get(int(k), 0.0) + float(L)
        return out


def _smoothstep(x):
    return 0.5 * (1.0 - np.cos(np.pi * x))


def _smoothstep_rate(x):
    return 0.5 * np.pi * np.sin(np.pi * x)


def _cubic_step(x):
    return x * x * (3.0 - 2.0 * x)


def _cubic_rate(x):
    return 6.0 * x * (1.0 - x)


_RAMP_SHAPES = {"cosine": (_smoothstep, _smoothstep_rate), "cubic": (_cubic_step, _cubic_rate)}


class RampedSignal(ControlSignal):
    """C^1 smoothing of a piecewise-constant signal by centered ramps.

    Every jump ``Delta`` at ``b`` becomes ``Delta S((t - b) / w + 1/2)`` on
    ``[b - w/2, b + w/2]``.  ``shape="cosine"`` uses the raised-cosine step
    ``S``, ``"cubic"`` the step ``3x^2 - 2x^3``, whose rate is quadratic on
    every piece and so integrated exactly by the Simpson weights of RK4.
    Both are symmetric, so a ramp keeps the integral of the signal unchanged.  With ``zero_ends``
    (default) the signal is first set to zero on ``[0, w/2)`` and
    ``(T - w/2, T]``, so the smoothed signal vanishes at both ends.

    ``pieces`` splits every ramp into that many breakpoint intervals so a
    fixed-step integrator resolves the transition even when the ramp is
    much shorter than its step.

    Raises
    ------
    ValueError
        If ``ramp_width`` exceeds the shortest constancy interval and
        ``overlap`` is False.  With ``overlap=True`` overlapping ramps add up.
    """

    def __init__(self, base: PiecewiseConstantSignal, ramp_width: float, zero_ends: bool = True, pieces: int = 1, overlap: bool = False, shape: str = "cosine"):
        super().__init__(base.T)
        if shape not in _RAMP_SHAPES:
            raise ValueError(f"unknown ramp shape {shape!r}")
        self.shape = shape
        self._step, self._rate = _RAMP_SHAPES[shape]
        b = base.breakpoints()
        w = float(ramp_width)
        if not w > 0:
            raise ValueError("ramp_width must be positive")
        shortest = float(np.min(np.diff(b)))
        if not overlap and w > shortest * (1 + 1e-12):
            raise ValueError(f"ramp_width {w} exceeds the shortest constancy interval {shortest}")
        if zero_ends and w > self.T / 2:
            raise ValueError("ramp_width must not exceed T/2")
        if pieces < 1:
            raise ValueError("pieces must be at least 1")
        self.base = base
        self.width = w
        self.zero_ends = zero_ends
        self.pieces = int(pieces)
        self.subspace = base.subspace
        # levels[k] -> levels[k + 1] across ramp k centered at centers[k]; -1 is zero
        idx = base.index
        centers, levels = [], []
        if zero_ends:
            lo, hi = w / 2, self.T - w / 2
            levels.append(-1)
            centers.append(lo)
            levels.append(int(idx[base.interval(lo)]))
        else:
            lo, hi = 0.0, self.T
            levels.append(int(idx[0]))
        for k in range(1, len(idx)):
            if lo < b[k] < hi and idx[k] != idx[k - 1]:
                centers.append(float(b[k]))
                levels.append(int(idx[k]))
        if zero_ends:
            centers.append(hi)
            levels.append(-1)
        self.centers = np.array(centers)
        self.levels = np.array(levels, dtype=np.int64)
        x = np.linspace(-0.5, 0.5, self.pieces + 1) * w
        edges = self.centers[:, None] + x[None, :]
        # Ramp k occupies exactly [starts[k], ends[k]], the floats that are breakpoints.
        self.starts = edges[:, 0].copy()
        self.ends = edges[:, -1].copy()
        self._slist, self._elist = self.starts.tolist(), self.ends.tolist()
        pts = [np.array([0.0, self.T])]
        if len(centers):
            pts.append(edges.ravel())
        bp = np.unique(np.concatenate(pts))
        self._bp = bp[(bp >= 0.0) & (bp <= self.T)]
        self._dense = {}

    @property
    def ramps(self) -> list:
        """``(start, end, from, to)`` per ramp; palette index -1 is zero."""
        return [
            (a, b, int(self.levels[k]), int(self.levels[k + 1])) for k, (a, b) in enumerate(zip(self._slist, self._elist))
        ]

    def breakpoints(self):
        return self._bp

    def _active(self, t, side):
        """Index range ``[k0, k1)`` of ramps open at ``t`` from ``side``.

        ``levels[k0]`` is the value before them.  Ramps are bracketed by
        their exact breakpoints, so a step ending at a ramp never sees it.
        """
        if side == "left":
            return bisect_left(self._elist, t), bisect_left(self._slist, t)
        return bisect_right(self._elist, t), bisect_right(self._slist, t)

    def _pal(self, j, modes):
        key = modes.tobytes()
        table = self._dense.get(key)
        if table is None:
            table = np.array([p.dense(modes, strict=False) for p in self.base.palette]).reshape(
                len(self.base.palette), len(modes), 3
            )
            table = np.concatenate([table, np.zeros((1, len(modes), 3), dtype=complex)])
            self._dense[key] = table
        return table[j]

    def _pal_field(self, j):
        return SpectralField.zero() if j < 0 else self.base.palette[j]

    def _weights(self, t, k0, k1):
        a, b = self.starts[k0:k1], self.ends[k0:k1]
        x = np.clip((t - a) / (b - a), 0.0, 1.0)
        return self._step(x), self._rate(x) / (b - a)

    def value(self, t, side="right"):
        self._check_time(t)
        k0, k1 = self._active(t, side)
        out = self._pal_field(self.levels[k0])
        if k1 > k0:
            g, _ = self._weights(t, k0, k1)
            for k, gk in zip(range(k0, k1), g):
                out = out + gk * (self._pal_field(self.levels[k + 1]) - self._pal_field(self.levels[k]))
        return out

    def dense(self, t, modes, side="right"):
        k0, k1 = self._active(t, side)
        out = self._pal(self.levels[k0], modes)
        if k1 > k0:
            g, _ = self._weights(t, k0, k1)
            for k, gk in zip(range(k0, k1), g):
                out = out + gk * (self._pal(self.levels[k + 1], modes) - self._pal(self.levels[k], modes))
        return out

    def derivative_dense(self, t, modes, side="right"):
        k0, k1 = self._active(t, side)
        out = np.zeros((len(modes), 3), dtype=complex)
        if k1 > k0:
            _, dg = self._weights(t, k0, k1)
            for k, dk in zip(range(k0, k1), dg):
                out = out + dk * (self._pal(self.levels[k + 1], modes) - self._pal(self.levels[k], modes))
        return out

    def derivative_value(self, t, side="right"):
        k0, k1 = self._active(t, side)
        out = SpectralField.zero()
        if k1 > k0:
            _, dg = self._weights(t, k0, k1)
            for k, dk in zip(range(k0, k1), dg):
                out = out + dk * (self._pal_field(self.levels[k + 1]) - self._pal_field(self.levels[k]))
        return out

    def _flat(self, a, b):
        # no ramp overlaps the open interval (a, b)
        return bisect_right(self._elist, a) == bisect_left(self._slist, b)

    def constant_on(self, a, b):
        return self._flat(a, b)

    def derivative(self) -> "ControlSignal":
        return _RampRate(self)


class _RampRate(ControlSignal):
    """Time derivative of a :class:`RampedSignal` (continuous, zero off the ramps)."""

    def __init__(self, ramped: RampedSignal):
        super().__init__(ramped.T)
        self.ramped = ramped
        self.subspace = ramped.subspace

    def breakpoints(self):
        return self.ramped.breakpoints()

    def value(self, t, side="right"):
        return self.ramped.derivative_value(t, side)

    def dense(self, t, modes, side="right"):
        return self.ramped.derivative_dense(t, modes, side)

    def constant_on(self, a, b):
        return self.ramped._flat(a, b)


class SampledSignal(ControlSignal):
    """Piecewise-linear interpolation of field samples at increasing times."""

    def __init__(self, times, values, subspace=None):
        times = np.asarray(times, dtype=float)
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must start at 0 and increase strictly")
        if len(values) != len(times):
            raise ValueError("one value per sample time")
        super().__init__(times[-1])
        self.times = times
        self._tlist = times.tolist()
        self.values = list(values)
        self.subspace = subspace
        self._dense = {}

    def breakpoints(self):
        return self.times

    def _locate(self, t):
        self._check_time(t)
        k = bisect_right(self._tlist, t) - 1
        k = min(max(k, 0), len(self.times) - 2)
        x = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, x

    def value(self, t, side="right"):
        if len(self.times) == 1:
            return self.values[0]
        k, x = self._locate(t)
        return (1 - x) * self.values[k] + x * self.values[k + 1]

    def dense(self, t, modes, side="right"):
        key = modes.tobytes()
        table = self._dense.get(key)
        if table is None:
            table = np.array([v.dense(modes, strict=False) for v in self.values]).reshape(
                len(self.values), len(modes), 3
            )
            self._dense[key] = table
        k, x = self._locate(t)
        return (1 - x) * table[k] + x * table[k + 1]


class PolynomialSignal(ControlSignal):
    """``sum_j t^j F_j`` with field coefficients ``F_j``."""

    def __init__(self, coeffs, T, subspace=None):
        super().__init__(T)
        self.coeffs = list(coeffs)
        if not self.coeffs:
            raise ValueError("need at least one coefficient")
        self.subspace = subspace
        self._dense = {}

    def value(self, t, side="right"):
        self._check_time(t)
        out = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            out = t * out + c
        return out

    def dense(self, t, modes, side="right"):
        key = modes.tobytes()
        table = self._dense.get(key)
        if table is None:
            table = np.array([c.dense(modes, strict=False) for c in self.coeffs]).reshape(len(self.coeffs), len(modes), 3)
            self._dense[key] = table
        out = table[-1]
        for c in table[-2::-1]:
            out = t * out + c
        return out

    def derivative(self) -> "PolynomialSignal":
        if len(self.coeffs) == 1:
            return PolynomialSignal([SpectralField.zero()], self.T, self.subspace)
        return PolynomialSignal([j * c for j, c in enumerate(self.coeffs) if j > 0], self.T, self.subspace)

    def map(self, fn) -> "PolynomialSignal":
        """Apply a linear map to every coefficient."""
        return PolynomialSignal([fn(c) for c in self.coeffs], self.T)


class FunctionSignal(ControlSignal):
    """Closed-form signal ``fn(t) -> SpectralField``."""

    def __init__(self, fn, T, breakpoints=(), subspace=None):
        super().__init__(T)
        self.fn = fn
        self._bp = np.unique(np.concatenate([[0.0, self.T], np.asarray(breakpoints, dtype=float)]))
        self.subspace = subspace

    def breakpoints(self):
        return self._bp

    def value(self, t, side="right"):
        self._check_time(t)
        return self.fn(t)


class ScaledSignal(ControlSignal):
    def __init__(self, base: ControlSignal, scale: float):
        super().__init__(base.T)
        self.base = base
        self.scale = float(scale)
        self.subspace = base.subspace

    def breakpoints(self):
        return self.base.breakpoints()

    def value(self, t, side="right"):
        return self.scale * self.base.value(t, side)

    def dense(self, t, modes, side="right"):
        return self.scale * self.base.dense(t, modes, side)

    def constant_on(self, a, b):
        return self.base.constant_on(a, b)


class SumSignal(ControlSignal):
    def __init__(self, parts):
        parts = [p for p in parts if not isinstance(p, ZeroSignal)] or [parts[0]]
        T = parts[0].T
        if any(abs(p.T - T) > 1e-12 for p in parts):
            raise ValueError("summands must share the horizon")
        super().__init__(T)
        self.parts = parts

    def breakpoints(self):
        return np.unique(np.concatenate([p.breakpoints() for p in self.parts]))

    def value(self, t, side="right"):
        out = self.parts[0].value(t, side)
        for p in self.parts[1:]:
            out = out + p.value(t, side)
        return out

    def dense(self, t, modes, side="right"):
        out = self.parts[0].dense(t, modes, side)
        for p in self.parts[1:]:
            out = out + p.dense(t, modes, side)
        return out

    def constant_on(self, a, b):
        return all(p.constant_on(a, b) for p in self.parts)


def as_signal(x, T: float) -> ControlSignal:
    """Coerce ``None``, a field or a signal to a :class:`ControlSignal`."""
    if x is None:
        return ZeroSignal(T)
    if isinstance(x, ControlSignal):
        return x
    if isinstance(x, SpectralField):
        return ConstantSignal(x, T) if len(x) else ZeroSignal(T)
    raise TypeError(f"cannot interpret {type(x).__name__} as a control signal")

