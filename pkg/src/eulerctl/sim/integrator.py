"""Galerkin-truncated integration of the shifted Euler system.

The truncated system on the l1 ball ``|m| <= M`` is

    du/dt = -P_M B(u + zeta) + P_M f,

integrated with classical RK4 on a fixed step, with steps aligned to the
breakpoints of both signals so no step straddles a control discontinuity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..spectral import lattice
from ..spectral.convolution import get_plan
from ..spectral.fields import SpectralField
from .controls import ControlSignal, ZeroSignal, as_signal


class BlowUpError(RuntimeError):
    """The Sobolev-norm guard tripped during integration."""

    def __init__(self, t, norm, ceiling):
        super().__init__(f"guard tripped at t={t:.6g}: norm {norm:.6g} exceeds ceiling {ceiling:.6g}")
        self.t = t
        self.norm = norm
        self.ceiling = ceiling


@dataclass(frozen=True)
class GalerkinConfig:
    """Truncation and time-stepping parameters.

    Attributes
    ----------
    cutoff : int
        l1 radius ``M`` of the retained modes.
    dt : float
        Target step; each segment between breakpoints is split into
        ``ceil(length / dt)`` equal steps.
    sobolev_k : float
        Order of the reporting norm and of the blow-up guard.
    guard_factor : float
        The run aborts once ``||u||_k > guard_factor * max(||u0||_k, 1)``.
    record_dt : float or None
        Minimum spacing of stored states; ``None`` stores every step.
    """

    cutoff: int = 3
    dt: float = 1e-3
    integrator: str = "rk4"
    sobolev_k: float = 4.0
    guard_factor: float = 1e3
    record_dt: float | None = None

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.integrator != "rk4":
            raise ValueError(f"unsupported integrator {self.integrator!r}")

    def with_(self, **kw) -> "GalerkinConfig":
        return replace(self, **kw)


class GalerkinSystem:
    """Dense evaluator of ``P_M B`` on the cutoff ball."""

    def __init__(self, cutoff: int):
        self.cutoff = int(cutoff)
        self.modes = lattice.ball(self.cutoff)
        self.plan = get_plan(self.modes, self.modes, self.modes)
        m = self.modes.astype(float)
        self._m = m
        self._m_over = m / (m * m).sum(axis=1)[:, None]
        self.weights = {}
        self._msq = (m * m).sum(axis=1)

    def B(self, w: np.ndarray) -> np.ndarray:
        """Truncated ``P_M B(w)`` on dense coefficients."""
        out, _ = self.plan.advect(w, w)
        return out - self._m * np.einsum("kj,kj->k", self._m_over, out)[:, None]

    def norm(self, c: np.ndarray, k: float) -> float:
        w = self.weights.get(k)
        if w is None:
            w = self._msq**k
            self.weights[k] = w
        return math.sqrt(2.0 * float(np.sum(w * (np.abs(c) ** 2).sum(axis=1))))

    def to_dense(self, u: SpectralField, strict: bool = True) -> np.ndarray:
        return u.dense(self.modes, strict=strict)

    def to_field(self, c: np.ndarray) -> SpectralField:
        return SpectralField.from_dense(self.modes, c)


_SYSTEMS: dict = {}


def galerkin_system(cutoff: int) -> GalerkinSystem:
    sys_ = _SYSTEMS.get(int(cutoff))
    if sys_ is None:
        sys_ = GalerkinSystem(cutoff)
        _SYSTEMS[int(cutoff)] = sys_
    return sys_


@dataclass
class Trajectory:
    """Stored states of a run on the cutoff ball.

    ``coeffs[i]`` holds the dense coefficients at ``times[i]`` on ``modes``.
    """

    times: np.ndarray
    coeffs: np.ndarray
    modes: np.ndarray
    config: GalerkinConfig
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> SpectralField:
        return SpectralField.from_dense(self.modes, self.coeffs[i])

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> SpectralField:
        return self.state(len(self) - 1)

    def at(self, t: float) -> SpectralField:
        """The stored state at time ``t`` (must be a stored time)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a stored time")
        return self.state(i)

    def norms(self, k: float) -> np.ndarray:
        w = lattice.l2_norm_sq(self.modes).astype(float) ** k
        return np.sqrt(2.0 * np.einsum("k,tkj->t", w, np.abs(self.coeffs) ** 2))


def segment_grid(signals, T: float, dt: float) -> list:
    """Segments ``(a, b, nsteps)`` between the merged breakpoints of ``signals``."""
    pts = [np.array([0.0, T])]
    for s in signals:
        pts.append(np.asarray(s.breakpoints(), dtype=float))
    bp = np.unique(np.concatenate(pts))
    bp = bp[(bp >= 0) & (bp <= T)]
    # Merge points closer than round-off so no zero-length segment appears.
    keep = [bp[0]]
    for x in bp[1:]:
        if x - keep[-1] > 1e-13 * max(1.0, T):
            keep.append(x)
    keep[-1] = T
    segs = []
    for a, b in zip(keep[:-1], keep[1:]):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        segs.append((float(a), float(b), n))
    return segs


def resolve(u0: SpectralField, zeta, f, cfg: GalerkinConfig, T: float | None = None, record: str = "auto") -> Trajectory:
    """Integrate ``du/dt = -P_M B(u + zeta) + P_M f`` from ``u0``.

    Parameters
    ----------
    u0 : SpectralField
        Initial state; must lie in the cutoff ball.
    zeta, f : ControlSignal, SpectralField or None
        Shift and forcing.  ``zeta`` must lie in the cutoff ball.
    cfg : GalerkinConfig
    T : float, optional
        Horizon; taken from the signals when omitted.
    record : {"auto", "all", "segments", "final"}
        ``"auto"`` honours ``cfg.record_dt``; ``"segments"`` stores the
        states at segment ends only.

    Raises
    ------
    BlowUpError
        If the Sobolev-norm guard trips.
    """
    sys_ = galerkin_system(cfg.cutoff)
    if T is None:
        for s in (zeta, f):
            if isinstance(s, ControlSignal):
                T = s.T
                break
        else:
            raise ValueError("horizon T is required when no signal carries one")
    zeta = as_signal(zeta, T)
    f = as_signal(f, T)
    modes = sys_.modes
    try:
        c = sys_.to_dense(u0)
    except ValueError:
        raise ValueError("u0 is not supported in the cutoff ball") from None

    k = cfg.sobolev_k
    ceiling = cfg.guard_factor * max(sys_.norm(c, k), 1.0)
    segs = segment_grid([zeta, f], T, cfg.dt)
    zero = isinstance(zeta, ZeroSignal)
    times = [0.0]
    states = [c.copy()]
    last_rec = 0.0
    rec_dt = cfg.record_dt if record == "auto" else None
    store_all = record in ("auto", "all")

    def rhs(state, z, g):
        w = state if z is None else state + z
        return g - sys_.B(w)

    for a, b, n in segs:
        h = (b - a) / n
        const_z = zero or zeta.constant_on(a, b)
        const_f = f.constant_on(a, b)
        zc = None if zero else (zeta.dense(0.5 * (a + b), modes) if const_z else None)
        fc = f.dense(0.5 * (a + b), modes) if const_f else None
        for i in range(n):
            t0 = a + i * h
            t1 = b if i == n - 1 else a + (i + 1) * h
            tm = 0.5 * (t0 + t1)
            if const_z:
                z0 = zm = z1 = zc
            else:
                z0 = zeta.dense(t0, modes, "right")
                zm = zeta.dense(tm, modes)
                z1 = zeta.dense(t1, modes, "left")
            if const_f:
                f0 = fm = f1 = fc
            else:
                f0 = f.dense(t0, modes, "right")
                fm = f.dense(tm, modes)
                f1 = f.dense(t1, modes, "left")
            k1 = rhs(c, z0, f0)
            k2 = rhs(c + 0.5 * h * k1, zm, fm)
            k3 = rhs(c + 0.5 * h * k2, zm, fm)
            k4 = rhs(c + h * k3, z1, f1)
            c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            nk = sys_.norm(c, k)
            if not np.isfinite(nk) or nk > ceiling:
                raise BlowUpError(t1, nk, ceiling)
            if store_all and (rec_dt is None or t1 - last_rec >= rec_dt - 1e-12 or t1 == T):
                times.append(t1)
                states.append(c.copy())
                last_rec = t1
        if record == "segments":
            times.append(b)
            states.append(c.copy())
    if record == "final":
        times.append(T)
        states.append(c.copy())
    if times[-1] != T:
        times.append(T)
        states.append(c.copy())
    return Trajectory(np.array(times), np.array(states), modes, cfg, {"ceiling": ceiling, "segments": len(segs)})


def resolve_controlled(u0: SpectralField, eta, h, cfg: GalerkinConfig, T: float | None = None, record: str = "auto") -> Trajectory:
    """Controlled system ``du/dt + P_M B(u) = P_M (h + eta)``."""
    if T is None:
        for s in (eta, h):
            if isinstance(s, ControlSignal):
                T = s.T
                break
        else:
            raise ValueError("horizon T is required when no signal carries one")
    force = as_signal(h, T) + as_signal(eta, T)
    return resolve(u0, None, force, cfg, T=T, record=record)
