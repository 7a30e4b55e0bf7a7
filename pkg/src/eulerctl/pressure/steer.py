"""Steering velocity and pressure projections together."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..saturation.fibers import FiberSubspace
from ..saturation.saturate import generator_space
from ..sim.controls import as_signal
from ..sim.diagnostics import pressure_recover
from ..sim.integrator import GalerkinConfig, resolve_controlled
from ..spectral import lattice
from ..spectral.fields import SpectralField
from ..spectral.frames import frame_vectors
from ..synth.cascade import SynthesisContext, SynthesisParams, _round, exact_projection_iterate, synthesize
from .lift import PressureTarget, lift_family, pressure_lift, quadratic_form_A


def a_lipschitz_constant(w: SpectralField, m: int, cutoff: int, k: float) -> float:
    """Operator norm of ``d -> A(d, w)`` from ``H^k`` on the cutoff ball to ``H^k``.

    Since ``A(u) - A(u') = A(u - u', u + u')``, this with ``w = u + u'``
    bounds ``||A(u) - A(u')||_k / ||u - u'||_k``.
    """
    modes = lattice.ball(cutoff)
    lp, lm = frame_vectors(modes)
    msq = lattice.l2_norm_sq(modes).astype(float)
    out_modes = lattice.ball(m)
    out_w = np.sqrt(2.0) * lattice.l2_norm_sq(out_modes).astype(float) ** (k / 2)
    cols = []
    for i in range(len(modes)):
        # unit H^k norm: ||c e^{imx}||_k^2 = 2 |m|^{2k} |c|^2
        s = 1.0 / (np.sqrt(2.0) * msq[i] ** (k / 2))
        for vec in (lp[i], lm[i]):
            for phase in (1.0, 1j):
                d = SpectralField(modes[i : i + 1], (s * phase * vec)[None])
                a = quadratic_form_A(d, w, m)
                c = a.dense(out_modes, strict=False)
                cols.append(np.concatenate([out_w * c.real, out_w * c.imag]))
    return float(np.linalg.norm(np.array(cols).T, 2))


@dataclass
class SteeringReport:
    """Errors of a combined velocity and pressure steering run."""

    m: int
    k: float
    velocity_error: float
    pressure_error: float
    full_error: float
    lipschitz_constant: float
    lift_norm: float
    lift_cutoff: int
    lift_residual: float
    consistency: float
    synthesis: dict = field(default_factory=dict)
    projection: dict = field(default_factory=dict)

    @property
    def pressure_bound(self) -> float:
        return self.lipschitz_constant * self.full_error

    def as_dict(self) -> dict:
        return _round({
            "schema_version": 1,
            "m": self.m,
            "k": self.k,
            "velocity_error": self.velocity_error,
            "pressure_error": self.pressure_error,
            "full_error": self.full_error,
            "lipschitz_constant": self.lipschitz_constant,
            "pressure_bound": self.pressure_bound,
            "lift_norm": self.lift_norm,
            "lift_cutoff": self.lift_cutoff,
            "lift_residual": self.lift_residual,
            "consistency": self.consistency,
            "synthesis": self.synthesis,
            "projection": self.projection,
        })

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)


def steer_velocity_pressure(u0: SpectralField, u_hat: SpectralField, p_hat, T: float, h=None, cfg: GalerkinConfig | None = None, params: SynthesisParams | None = None, m: int = 1, strategy: str = "minimal_norm", stages: int = 1, context: SynthesisContext | None = None, iterate: bool = True, tol: float = 1e-6, max_iter: int = 10, cutoff_budget: int | None = None, rule: str = "fixed"):
    """Control that brings ``P_{F_m} u(T)`` near ``u_hat`` and ``P_{G_m} p(T)`` near ``p_hat``.

    The velocity target is ``u_hat + v`` with ``v`` the pressure lift, so
    ``A(u_hat + v) = p_hat``.  With ``iterate`` the synthesis target is
    corrected by :func:`exact_projection_iterate` on the whole truncation
    space, otherwise the cascade output is used as it is.

    Returns
    -------
    eta : ControlSignal
    report : SteeringReport

    Raises
    ------
    ValueError
        If the lift wavevectors do not fit in ``cfg.cutoff``.
    """
    cfg = GalerkinConfig(cutoff=4) if cfg is None else cfg
    params = SynthesisParams() if params is None else params
    k = cfg.sobolev_k
    target = PressureTarget(m, u_hat, p_hat)
    quads = lift_family(m, strategy)
    need = max(q.max_l1() for q in quads.values())
    if cutoff_budget is not None and need > cutoff_budget:
        warnings.warn(f"lift wavevectors need cutoff {need}, above the budget {cutoff_budget}", RuntimeWarning, stacklevel=2)
    if need > cfg.cutoff:
        raise ValueError(f"lift wavevectors need cutoff {need} > {cfg.cutoff}")
    v = pressure_lift(target, quads, rule)
    goal = u_hat + v
    lift_residual = float((quadratic_form_A(goal, m=m) - p_hat).norm(k))
    if context is None:
        context = SynthesisContext(generator_space(3), cutoff=cfg.cutoff)
    last = {}

    def synth(tg):
        eta, rep = synthesize(u0, tg, T, h, stages, params, cfg, context)
        last["report"] = rep
        return eta

    projection = {}
    if iterate:
        F = FiberSubspace.ball(cfg.cutoff)
        res = exact_projection_iterate(u0, goal, F, synth, tol, max_iter, cfg=cfg, h=h, k=k, T=T)
        eta = res.control
        projection = res.as_dict()
    else:
        eta = synth(goal)
    uT = resolve_controlled(u0, eta, h, cfg, T=T, record="final").final
    hT = as_signal(h, T).value(T, "left") if h is not None else None
    pT = pressure_recover(uT, hT)
    pG = pT.restrict(lattice.ball(m)) if len(pT) else pT
    FmT = FiberSubspace.ball(m).project(uT)
    report = SteeringReport(
        m=m,
        k=k,
        velocity_error=float((FmT - u_hat).norm(k)),
        pressure_error=float((pG - p_hat).norm(k)),
        full_error=float((uT - goal).norm(k)),
        lipschitz_constant=a_lipschitz_constant(uT + goal, m, cfg.cutoff, k),
        lift_norm=float(v.norm(k)),
        lift_cutoff=int(need),
        lift_residual=lift_residual,
        consistency=float((pG - quadratic_form_A(uT, m=m)).norm(k)),
        synthesis=last["report"].as_dict() if "report" in last else {},
        projection=projection,
    )
    return eta, report
