"""Acceptance suite: one test per criterion, each printing a single verdict line."""

import filecmp
import os
import time

import numpy as np
import pytest

from eulerctl.harness import ExperimentConfig, reference_pair, run
from eulerctl.pressure import (
    PressureTarget,
    lift_family,
    pressure_lift,
    quadratic_form_A,
    steer_velocity_pressure,
)
from eulerctl.saturation import FiberSubspace, generator_space, saturation_sequence, saturation_step, verify_certificate_on_grid
from eulerctl.sim import GalerkinConfig, PiecewiseConstantSignal, lipschitz_probe, resolve, resolve_controlled
from eulerctl.sim.integrator import Trajectory, galerkin_system
from eulerctl.spectral import bilinear_B, evaluate_on_grid, grid_oracle_advect, lattice, leray_project, random_field, random_scalar
from eulerctl.synth import (
    SynthesisContext,
    SynthesisParams,
    compute_relaxation_defect,
    convexify,
    eliminate_zeta,
    exact_projection_iterate,
    relax_stage,
    relaxation_control,
    synthesize,
)
from eulerctl.sim import ConstantSignal

CFG3 = GalerkinConfig(cutoff=3, dt=1e-3)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def context3():
    return SynthesisContext(generator_space(2), cutoff=3)


def test_c01_bilinear_matches_grid_oracle(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        a = random_field(lattice.ball(3), rng)
        b = random_field(lattice.ball(3), rng)
        ref = leray_project(grid_oracle_advect(a, b, 16))
        worst = max(worst, (bilinear_B(a, b) - ref).norm(0))
    dt = time.perf_counter() - t0
    verdict(1, "spectral/grid equivalence", worst <= 1e-10 and dt < 10, f"max diff {worst:.2e} (<= 1e-10), {dt:.2f} s (< 10 s)")


def test_c02_conservation(verdict):
    rng = np.random.default_rng(102)
    cfg = GalerkinConfig(cutoff=4, dt=1e-3)
    u0 = random_field(lattice.ball(4), rng)
    tr = resolve(u0, None, None, cfg, T=1.0, record="all")
    e = tr.norms(0) ** 2
    drift = float(np.abs(e / e[0] - 1).max())
    div = max(tr.state(i).divergence_residual() for i in range(len(tr)))
    no_mean_mode = bool(np.all(np.abs(tr.modes).sum(axis=1) > 0))
    mean = max(float(np.abs(evaluate_on_grid(tr.state(i), 12).mean(axis=(0, 1, 2))).max()) for i in range(0, len(tr), 50))
    skew = 0.0
    for _ in range(100):
        a, b = random_field(lattice.ball(3), rng), random_field(lattice.ball(3), rng)
        skew = max(skew, abs(bilinear_B(a, b).inner(b)))
    ok = drift <= 1e-6 and div <= 1e-12 and no_mean_mode and mean <= 1e-12 and skew <= 1e-12
    verdict(2, "conservation", ok, f"energy drift {drift:.2e}, div {div:.1e}, mean {mean:.1e}, <B(a,b),b> {skew:.1e}")


def test_c03_continuity_probes(verdict):
    rng = np.random.default_rng(103)
    u0 = random_field(lattice.ball(3), rng, 0.05)
    du = random_field(lattice.ball(3), rng, 0.05)
    f = random_field(lattice.ball(2), rng, 0.1)
    rep = lipschitz_probe(u0, du, None, f, CFG3, scales=(1e-2, 5e-3, 2.5e-3))
    r = rep.ratios
    halving = max(max(a, b) / min(a, b) for a, b in zip(r, r[1:]))
    ok = halving <= 2.0 and rep.time_ratio <= 1.1 * rep.rate_bound
    verdict(3, "continuity probes", ok, f"ratios {', '.join(f'{x:.4f}' for x in r)}; time ratio {rep.time_ratio:.4f} vs sup rate {rep.rate_bound:.4f}")


@pytest.mark.slow
def test_c04_saturation(verdict):
    t0 = time.perf_counter()
    rep = saturation_sequence(generator_space(3), 2, combo_depth=2, cutoff=6)
    worst = max(max(verify_certificate_on_grid(d.plus), verify_certificate_on_grid(d.minus)) for d in rep.certificates())
    dt = time.perf_counter() - t0
    inc = all(a < b for a, b in zip(rep.dims, rep.dims[1:]))
    mono = all(rep.fiber_map[i + 1][m] >= d for i in range(len(rep.dims) - 1) for m, d in rep.fiber_map[i].items())
    new = [m for m in rep.complete_fibers(2) if sum(abs(x) for x in m) > 3]
    ok = inc and worst < 1e-9 and mono and len(new) > 0 and dt < 300
    verdict(4, "saturation", ok, f"dims {rep.dims}, grid residual {worst:.1e} over {len(rep.certificates())} directions, {len(new)} new complete fibers (e.g. {new[:1]}), {dt:.0f} s")


def test_c05_convexification_identity(verdict, context3):
    rng = np.random.default_rng(105)
    step = saturation_step(generator_space(2), cutoff=3)
    forms = [convexify(c) for d in step.directions for c in (d.plus, d.minus)]
    certifier = context3.certifier(1)
    for _ in range(4):
        c = rng.normal(size=len(step.directions))
        v = sum((ci * d.direction for ci, d in zip(c, step.directions)), start=0 * step.directions[0].direction)
        forms.append(convexify(certifier.certify(v)))
    worst = 0.0
    for form in forms:
        for _ in range(20):
            worst = max(worst, form.residual(random_field(lattice.ball(3), rng)))
    verdict(5, "convexification identity", worst < 1e-12, f"max residual {worst:.2e} over {len(forms)} forms x 20 states")


def test_c06_relaxation_rate(verdict, context3):
    rng = np.random.default_rng(6)
    dirs = context3.step(1).directions
    xi = sum((c * d.direction for c, d in zip(rng.normal(size=3), dirs[:3])), start=0 * dirs[0].direction)
    res = relax_stage(ConstantSignal(xi, 1.0), 1, context3, SynthesisParams(s=4, n=4))
    sys_ = galerkin_system(3)
    u = random_field(lattice.ball(3), rng, 0.5)
    times = np.linspace(0.0, 1.0, 65)
    tr = Trajectory(times, np.repeat(sys_.to_dense(u, strict=False)[None], len(times), axis=0), sys_.modes, CFG3)
    ns = [4, 8, 16, 32]
    sups = [compute_relaxation_defect(tr, relaxation_control(res.schedule, n), res.schedule).sup for n in ns]
    p = -float(np.polyfit(np.log(ns), np.log(sups), 1)[0])
    verdict(6, "relaxation rate", 0.8 <= p <= 1.2, f"sup|Kf_n| {', '.join(f'{x:.3g}' for x in sups)}; exponent {p:.3f}")


def test_c07_shift_identity(verdict):
    worst = 0.0
    for i in range(10):
        rng = np.random.default_rng(700 + i)
        u0 = random_field(lattice.ball(2), rng, 0.1)
        cuts = np.sort(rng.uniform(0.15, 0.85, 2))
        if cuts[1] - cuts[0] < 0.15:
            cuts[1] = cuts[0] + 0.15
        zeta = PiecewiseConstantSignal(np.concatenate([[0.0], cuts, [1.0]]), [random_field(lattice.ball(2), rng, 0.1) for _ in range(3)])
        eta = PiecewiseConstantSignal(np.array([0.0, 0.5, 1.0]), [random_field(lattice.ball(2), rng, 0.1) for _ in range(2)])
        ctrl = eliminate_zeta(eta, zeta, 0.1, shape="cubic")
        shifted = resolve(u0, ctrl.zeta_tilde, eta, CFG3, record="segments")
        plain = resolve_controlled(u0, ctrl, None, CFG3, record="segments")
        for j, t in enumerate(shifted.times):
            lhs = shifted.state(j) + ctrl.zeta_tilde.value(t, "left" if j else "right")
            worst = max(worst, (lhs - plain.at(t)).norm(0))
    verdict(7, "shift elimination", worst < 1e-8, f"max trajectory gap {worst:.2e} over 10 instances")


@pytest.mark.slow
def test_c08_end_to_end_steering(verdict, context3):
    u_hat, u0 = reference_pair(1)
    t0 = time.perf_counter()
    errs = {}
    for n in (8, 16, 32):
        _, rep = synthesize(u0, u_hat, 1.0, None, 1, SynthesisParams(s=16, n=n), CFG3, context3)
        errs[n] = rep.relative["final"]
    dt = time.perf_counter() - t0
    mono = errs[16] <= errs[8] and errs[32] <= errs[16]
    ok = errs[32] < 0.1 and mono and dt < 600
    verdict(8, "approximate controllability", ok, f"relative errors { {n: round(e, 6) for n, e in errs.items()} }, {dt:.0f} s")


@pytest.mark.slow
def test_c09_exact_projection(verdict, context3):
    u_hat, u0 = reference_pair(1)
    F = FiberSubspace.ball(1)
    params = SynthesisParams(s=16, n=32)
    res = exact_projection_iterate(u0, u_hat, F, lambda tg: synthesize(u0, tg, 1.0, None, 1, params, CFG3, context3)[0], 1e-3, 20, cfg=CFG3)
    ok = res.converged and res.error < 1e-3 and res.iterations <= 20
    verdict(9, "projection targeting", ok, f"||P_F u(T) - P_F u_hat||_4 = {res.error:.2e} after {res.iterations} iteration(s)")


def test_c10_pressure_lift(verdict):
    rng = np.random.default_rng(110)
    worst, disjoint, count = 0.0, True, 0
    for m in (1, 2):
        for strategy in ("paper_formula", "minimal_norm"):
            quads = lift_family(m, strategy)
            for _ in range(20):
                u = random_field(lattice.ball(m), rng)
                p = random_scalar(lattice.ball(m), rng)
                v = pressure_lift(PressureTarget(m, u, p), quads)
                worst = max(worst, (quadratic_form_A(u + v, m=m) - p).norm(0))
                disjoint &= bool(len(v) == 0 or lattice.l1_norm(v.modes).min() > m)
                count += 1
    verdict(10, "pressure lift", worst < 1e-10 and disjoint, f"max |A(u+v) - p| {worst:.2e} over {count} pairs, supports disjoint: {disjoint}")


@pytest.mark.slow
def test_c11_combined_steering(verdict):
    rng = np.random.default_rng(11)
    u_hat = random_field(lattice.ball(1), rng)
    u_hat = (0.5 / u_hat.norm(4)) * u_hat
    p_hat = random_scalar(lattice.ball(1), rng)
    p_hat = (0.1 / p_hat.norm(4)) * p_hat
    u0 = random_field(lattice.ball(1), rng)
    u0 = (1.0 / u0.norm(4)) * u0
    _, rep = steer_velocity_pressure(u0, u_hat, p_hat, 1.0, None, GalerkinConfig(cutoff=4), m=1, strategy="minimal_norm", tol=1e-4, max_iter=10)
    within = rep.pressure_error <= rep.pressure_bound
    small = rep.velocity_error >= 1e-3 or rep.pressure_error < 1e-2
    detail = (
        f"pressure error {rep.pressure_error:.2e} <= C_emp {rep.lipschitz_constant:.3f} x velocity error "
        f"{rep.full_error:.2e} = {rep.pressure_bound:.2e}; projected velocity error {rep.velocity_error:.1e}"
    )
    verdict(11, "combined steering", within and small and rep.velocity_error < 1e-3, detail)


def test_c12_determinism(verdict, tmp_path):
    docs = {
        "simulate": ["T=0.2"],
        "saturate": ["galerkin.cutoff=3", "generators.radius=1"],
        "synthesize": ["galerkin.cutoff=2", "generators.radius=1", "target.radius=1", "initial.radius=1", "target.norm=0.2", "initial.norm=0.2", "synthesis.s=4", "synthesis.n=4"],
        "verify": [],
    }
    same, compared = True, 0
    for kind, ov in docs.items():
        cfg = ExperimentConfig.from_dict({"kind": kind, "seed": 7}, ov)
        a, b = tmp_path / kind / "a", tmp_path / kind / "b"
        run(cfg, str(a))
        run(cfg, str(b))
        names = sorted(os.listdir(a))
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        same &= not mismatch and not errors and names == sorted(os.listdir(b))
        compared += len(match)
    verdict(12, "determinism", same, f"{compared} artifacts byte-identical across reruns of {len(docs)} experiment kinds")
