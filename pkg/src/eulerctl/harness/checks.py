"""Fast invariant checks run by the ``verify`` experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..pressure.lift import PressureTarget, lift_family, pressure_lift, quadratic_form_A
from ..saturation.saturate import generator_space, saturation_step
from ..sim.controls import PiecewiseConstantSignal
from ..sim.integrator import GalerkinConfig, resolve, resolve_controlled
from ..spectral import lattice
from ..spectral.fields import random_field, random_scalar
from ..spectral.grid import grid_oracle_advect
from ..spectral.operators import bilinear_B, leray_project
from ..synth.convexify import convexify
from ..synth.eliminate import eliminate_zeta


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def as_row(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "passed": self.passed}


def _result(name, value, threshold):
    return CheckResult(name, float(value), float(threshold), bool(value <= threshold))


def check_bilinear_oracle(rng, pairs: int = 10):
    worst = 0.0
    for _ in range(pairs):
        a = random_field(lattice.ball(3), rng)
        b = random_field(lattice.ball(3), rng)
        ref = leray_project(grid_oracle_advect(a, b, 16))
        worst = max(worst, (bilinear_B(a, b) - ref).norm(0) / max(ref.norm(0), 1.0))
    return _result("bilinear_oracle", worst, 1e-10)


def check_skew(rng, pairs: int = 20):
    worst = 0.0
    for _ in range(pairs):
        a = random_field(lattice.ball(3), rng)
        b = random_field(lattice.ball(3), rng)
        worst = max(worst, abs(bilinear_B(a, b).inner(b)) / (a.norm(1) * b.norm(0) ** 2))
    return _result("skew_symmetry", worst, 1e-12)


def check_energy(rng):
    cfg = GalerkinConfig(cutoff=3, dt=1e-3)
    u0 = random_field(lattice.ball(3), rng)
    tr = resolve(u0, None, None, cfg, T=0.1, record="all")
    e = tr.norms(0) ** 2
    return _result("energy_drift", float(np.abs(e / e[0] - 1).max()), 1e-6)


def check_convexification(rng):
    E = generator_space(2)
    step = saturation_step(E, cutoff=3)
    worst = 0.0
    for d in step.directions[:4]:
        for cert in (d.plus, d.minus):
            form = convexify(cert)
            for _ in range(3):
                worst = max(worst, form.residual(random_field(lattice.ball(3), rng)))
    return _result("convexification_identity", worst, 1e-12)


def check_shift_identity(rng):
    cfg = GalerkinConfig(cutoff=3, dt=1e-3)
    u0 = random_field(lattice.ball(2), rng, 0.1)
    zs = [random_field(lattice.ball(2), rng, 0.1) for _ in range(3)]
    zeta = PiecewiseConstantSignal(np.array([0.0, 0.3, 0.55, 1.0]), zs)
    eta = PiecewiseConstantSignal(np.array([0.0, 0.5, 1.0]), [random_field(lattice.ball(2), rng, 0.1) for _ in range(2)])
    ctrl = eliminate_zeta(eta, zeta, 0.1, shape="cubic")
    shifted = resolve(u0, ctrl.zeta_tilde, eta, cfg, record="segments")
    plain = resolve_controlled(u0, ctrl, None, cfg, record="segments")
    n = min(len(shifted.times), len(plain.times))
    worst = 0.0
    for i in range(n):
        t = shifted.times[i]
        lhs = shifted.state(i) + ctrl.zeta_tilde.value(t, "left")
        worst = max(worst, (lhs - plain.at(t)).norm(0))
    return _result("shift_identity", worst, 1e-8)


def check_lift(rng):
    worst = 0.0
    for strategy in ("paper_formula", "minimal_norm"):
        quads = lift_family(1, strategy)
        for _ in range(3):
            u = random_field(lattice.ball(1), rng)
            p = random_scalar(lattice.ball(1), rng)
            v = pressure_lift(PressureTarget(1, u, p), quads)
            worst = max(worst, (quadratic_form_A(u + v, m=1) - p).norm(0))
    return _result("pressure_lift", worst, 1e-10)


CHECKS = {
    "bilinear_oracle": check_bilinear_oracle,
    "skew_symmetry": check_skew,
    "energy_drift": check_energy,
    "convexification_identity": check_convexification,
    "shift_identity": check_shift_identity,
    "pressure_lift": check_lift,
}


def run_checks(names=None, seed: int = 0) -> list:
    """Run the named checks (all by default), each with its own seeded generator."""
    names = list(CHECKS) if not names else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    return [CHECKS[n](np.random.default_rng([seed, i])) for i, n in enumerate(names)]
