"""Fast switching between shifts and the primitive of the resulting defect."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.controls import PiecewiseConstantSignal
from ..sim.integrator import Trajectory, galerkin_system
from ..spectral.fields import SpectralField
from .convexify import _shift_key
from .pwc import PiecewiseConstantControl

SUM_TOL = 1e-12


@dataclass
class Mixture:
    """Convex drift ``sum_i weights[i] B(u + zetas[i]) - eta`` on one interval."""

    weights: np.ndarray
    zetas: list
    eta: SpectralField

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.weights) != len(self.zetas) or len(self.zetas) == 0:
            raise ValueError("need one positive weight per shift")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > SUM_TOL:
            raise ValueError("weights must be positive and sum to one")

    def __len__(self):
        return len(self.zetas)


@dataclass
class RelaxationSchedule:
    """One :class:`Mixture` per interval ``[r T / s, (r + 1) T / s)``."""

    T: float
    mixtures: list
    info: dict = field(default_factory=dict)

    @property
    def s(self) -> int:
        return len(self.mixtures)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.s + 1)

    def eta_signal(self) -> PiecewiseConstantSignal:
        """The shift-free part ``eta(t)`` of the schedule."""
        return PiecewiseConstantSignal(self.grid, [mx.eta for mx in self.mixtures])

    def shifts(self) -> int:
        return max(len(mx) for mx in self.mixtures)


def _collect(weights, zetas):
    """Merge identical shifts and drop zero weights, keeping first-seen order."""
    slot = {}
    w_out, z_out = [], []
    for w, z in zip(weights, zetas):
        if w <= 0:
            continue
        key = b"0" if len(z) == 0 else _shift_key(z) + (b"+" if _sign(z) > 0 else b"-")
        if key in slot:
            w_out[slot[key]] += w
        else:
            slot[key] = len(z_out)
            w_out.append(w)
            z_out.append(z)
    w_out = np.array(w_out)
    return w_out / w_out.sum(), z_out


def _sign(z):
    x = z.coeffs.view(float).ravel()
    nz = np.flatnonzero(np.round(x, 12))
    return 1.0 if not len(nz) or x[nz[0]] > 0 else -1.0


def build_schedule(pwc: PiecewiseConstantControl, forces, mixing: str = "netted") -> RelaxationSchedule:
    """Per-interval mixtures from a convex control and one convex form per vertex.

    ``literal`` uses every vertex with its weight ``c[l, r]``.  ``netted``
    (only for the ``+-`` vertex layout of :func:`pwc_approximate`) first
    cancels each pair of opposite vertices, leaving weight
    ``|c[l, r] - c[l + d, r]|`` on the surviving one and moving the rest to
    the zero shift; both give the same ``eta_1(t_r)``.
    """
    if len(forces) != pwc.m:
        raise ValueError("one convexified force per vertex")
    if mixing not in ("netted", "literal"):
        raise ValueError(f"unknown mixing {mixing!r}")
    C = pwc.coefficients
    if mixing == "netted":
        if pwc.basis is None or pwc.m != 2 * len(pwc.basis):
            raise ValueError("netted mixing needs the paired vertex layout")
        d = len(pwc.basis)
        net = C[:d] - C[d:]
        C = np.vstack([np.clip(net, 0, None), np.clip(-net, 0, None)])
        rest = 1.0 - C.sum(axis=0)
    else:
        rest = np.zeros(pwc.s)
    zero = SpectralField.zero()
    mixtures = []
    for r in range(pwc.s):
        weights, zetas = [], []
        eta = SpectralField.zero()
        for l, force in enumerate(forces):
            c = C[l, r]
            if c <= 0:
                continue
            eta = eta + c * force.eta
            if force.p == 0:
                weights.append(c)
                zetas.append(zero)
            else:
                weights.extend((c * force.lambdas).tolist())
                zetas.extend(force.zetas)
        if rest[r] > 0:
            weights.append(rest[r])
            zetas.append(zero)
        w, z = _collect(weights, zetas)
        mixtures.append(Mixture(w, z, eta))
    return RelaxationSchedule(pwc.T, mixtures, {"mixing": mixing})


def _paired_order(zetas):
    """Indices with each shift followed by its negative when present."""
    keys = [b"0" if len(z) == 0 else _shift_key(z) for z in zetas]
    used = [False] * len(zetas)
    order = []
    for i in range(len(zetas)):
        if used[i]:
            continue
        used[i] = True
        order.append(i)
        if keys[i] == b"0":
            continue
        for j in range(i + 1, len(zetas)):
            if not used[j] and keys[j] == keys[i]:
                used[j] = True
                order.append(j)
                break
    return order


def relaxation_control(schedule: RelaxationSchedule, n: int, order: str = "paired") -> PiecewiseConstantSignal:
    """Shift that cycles ``n`` times per interval through the mixture.

    Inside interval ``r`` each period of length ``T / (s n)`` visits
    ``zeta_i`` for ``weights[i] T / (s n)``.  ``order="paired"`` places each
    shift next to its negative, ``"listed"`` keeps the mixture order.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if order not in ("paired", "listed"):
        raise ValueError(f"unknown order {order!r}")
    T, s = schedule.T, schedule.s
    L = T / s
    palette, slot = [], {}
    bps, index = [0.0], []
    for r, mx in enumerate(schedule.mixtures):
        idx = _paired_order(mx.zetas) if order == "paired" else list(range(len(mx)))
        pal = []
        for i in idx:
            z = mx.zetas[i]
            key = b"0" if len(z) == 0 else _shift_key(z) + (b"+" if _sign(z) > 0 else b"-")
            if key not in slot:
                slot[key] = len(palette)
                palette.append(z)
            pal.append(slot[key])
        cum = np.concatenate([[0.0], np.cumsum(mx.weights[idx])])
        cum[-1] = 1.0
        for k in range(n):
            a = r * L + k * L / n
            for j, p in enumerate(pal):
                end = a + cum[j + 1] * L / n
                if index and index[-1] == p:
                    bps[-1] = end
                elif end > bps[-1]:
                    index.append(p)
                    bps.append(end)
                # pulses below the float resolution of t are dropped
        bps[-1] = (r + 1) * L
    bps[-1] = T
    return PiecewiseConstantSignal(np.array(bps), palette, np.array(index))


@dataclass
class DefectCurve:
    """``f_n`` and its primitive ``K f_n`` along a reference trajectory."""

    times: np.ndarray
    K_norm: np.ndarray
    f_times: np.ndarray
    f_norm: np.ndarray
    k: float

    @property
    def sup(self) -> float:
        return float(self.K_norm.max(initial=0.0))


def compute_relaxation_defect(u1: Trajectory, zeta_n: PiecewiseConstantSignal, schedule: RelaxationSchedule, k: float | None = None) -> DefectCurve:
    """``f_n = P_M[B(u1 + zeta_n) - sum_i d_i B(u1 + zeta_i)]`` and ``K f_n = int_0^t f_n``.

    ``u1`` is interpolated linearly between its stored states.  On a piece
    where ``zeta_n`` is constant, ``f_n = B~(u1, zeta - zbar) + B(zeta) - beta``
    with ``zbar = sum d_i zeta_i`` and ``beta = sum d_i B(zeta_i)`` is then
    affine in ``t``, so the trapezoidal rule integrates it exactly.  Norms
    are ``H^k`` with ``k = sobolev_k + 1`` of the trajectory config by
    default; ``f_norm`` is sampled at the left end of every piece.
    """
    cfg = u1.config
    if k is None:
        k = cfg.sobolev_k + 1
    sys_ = galerkin_system(cfg.cutoff)
    modes = sys_.modes
    if len(u1.modes) != len(modes) or np.any(u1.modes != modes):
        raise ValueError("trajectory must live on the cutoff ball")
    T = schedule.T
    if abs(u1.times[-1] - T) > 1e-9 or abs(zeta_n.T - T) > 1e-9:
        raise ValueError("trajectory, shift and schedule must share the horizon")

    def Bsym(a, b):
        out = sys_.plan.advect(a, b)[0] + sys_.plan.advect(b, a)[0]
        return out - sys_._m * np.einsum("kj,kj->k", sys_._m_over, out)[:, None]

    pal = [z.dense(modes, strict=False) for z in zeta_n.palette]
    Bpal = [sys_.B(z) for z in pal]
    zbar, beta = [], []
    for mx in schedule.mixtures:
        Z = np.array([z.dense(modes, strict=False) for z in mx.zetas])
        zbar.append(np.tensordot(mx.weights, Z, axes=1))
        beta.append(np.tensordot(mx.weights, np.array([sys_.B(z) for z in Z]), axes=1))
    s = schedule.s
    grid = np.unique(np.concatenate([zeta_n.breakpoints(), u1.times, schedule.grid]))
    times = u1.times
    C = u1.coeffs

    def u_at(t):
        i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
        x = (t - times[i]) / (times[i + 1] - times[i])
        return (1 - x) * C[i] + x * C[i + 1]

    def f_at(t, j, r):
        return Bsym(u_at(t), pal[j] - zbar[r]) + Bpal[j] - beta[r]

    w = sys_._msq**k
    nrm = lambda c: float(np.sqrt(2.0 * np.sum(w * (np.abs(c) ** 2).sum(axis=1))))  # noqa: E731
    K = np.zeros_like(C[0])
    out_t, out_f, out_K = [0.0], [], [0.0]
    for a, b in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (a + b)
        j = int(zeta_n.index[zeta_n.interval(mid)])
        r = int(min(np.floor(mid * s / T), s - 1))
        fa, fb = f_at(a, j, r), f_at(b, j, r)
        Km = K + (b - a) / 8.0 * (3 * fa + fb)
        K = K + (b - a) / 2.0 * (fa + fb)
        out_f.append(nrm(fa))
        out_t.extend([mid, b])
        out_K.extend([nrm(Km), nrm(K)])
    return DefectCurve(np.array(out_t), np.array(out_K), grid[:-1].copy(), np.array(out_f), float(k))
