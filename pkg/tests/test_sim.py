import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eulerctl.sim import (
    BlowUpError,
    ConstantSignal,
    GalerkinConfig,
    PiecewiseConstantSignal,
    RampedSignal,
    ZeroSignal,
    as_signal,
    export_trajectory,
    lipschitz_probe,
    pressure_recover,
    resolve,
    resolve_controlled,
    vorticity_sup,
)
from eulerctl.spectral import lattice, random_field, trig_mode
from eulerctl.spectral.grid import grid_gradient_product, scalar_from_raw
from eulerctl.spectral.operators import inverse_laplacian

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _pwc(rng, bps, scale=1.0):
    vals = [random_field(lattice.ball(1), rng, scale) for _ in range(len(bps) - 1)]
    return PiecewiseConstantSignal(np.asarray(bps), vals)


class TestSignals:
    def test_piecewise_sides(self, rng):
        s = _pwc(rng, [0.0, 0.5, 1.0])
        a, b = s.palette
        assert (s.value(0.5, "left") - a).norm() == 0.0
        assert (s.value(0.5, "right") - b).norm() == 0.0
        assert (s.value(1.0, "left") - b).norm() == 0.0

    def test_breakpoints_must_increase(self, rng):
        with pytest.raises(ValueError):
            _pwc(rng, [0.0, 0.5, 0.5, 1.0])

    def test_out_of_horizon(self, rng):
        with pytest.raises(ValueError):
            _pwc(rng, [0.0, 1.0]).value(1.5)

    def test_as_signal(self, rng):
        assert isinstance(as_signal(None, 1.0), ZeroSignal)
        assert isinstance(as_signal(random_field(lattice.ball(1), rng), 1.0), ConstantSignal)
        with pytest.raises(TypeError):
            as_signal(3.0, 1.0)

    @pytest.mark.parametrize("shape", ["cosine", "cubic"])
    def test_ramp_vanishes_at_ends(self, rng, shape):
        r = RampedSignal(_pwc(rng, [0.0, 0.3, 1.0]), 0.1, shape=shape)
        assert r.value(0.0).norm() == 0.0
        assert r.value(1.0, "left").norm() == 0.0

    @pytest.mark.parametrize("shape", ["cosine", "cubic"])
    def test_ramp_preserves_integral(self, rng, shape):
        base = _pwc(rng, [0.0, 0.3, 0.6, 1.0])
        r = RampedSignal(base, 0.1, zero_ends=False, shape=shape)
        modes = lattice.ball(1)
        t = np.linspace(0.0, 1.0, 20001)
        vals = np.array([r.dense(x, modes, "left" if x == 1.0 else "right") for x in t])
        integral = np.trapezoid(vals, t, axis=0)
        exact = sum((b - a) * v.dense(modes, strict=False) for a, b, v in zip(base.breakpoints()[:-1], base.breakpoints()[1:], base.palette))
        np.testing.assert_allclose(integral, exact, atol=1e-7)

    @pytest.mark.parametrize("shape", ["cosine", "cubic"])
    def test_ramp_derivative_matches_difference_quotient(self, rng, shape):
        r = RampedSignal(_pwc(rng, [0.0, 0.5, 1.0]), 0.2, shape=shape)
        modes = lattice.ball(1)
        d = r.derivative()
        for t in (0.45, 0.5, 0.53, 0.05):
            h = 1e-6
            fd = (r.dense(t + h, modes) - r.dense(t - h, modes)) / (2 * h)
            np.testing.assert_allclose(d.dense(t, modes), fd, atol=1e-6)

    def test_ramp_too_wide(self, rng):
        with pytest.raises(ValueError):
            RampedSignal(_pwc(rng, [0.0, 0.05, 1.0]), 0.1)


class TestIntegrator:
    def test_shear_forcing_exact(self):
        # B vanishes on span{a}, so u(t) = u0 + t f exactly
        a = trig_mode((1, 0, 0), "cos", vector=(0, 1, 0))
        cfg = GalerkinConfig(cutoff=2, dt=0.05)
        tr = resolve(0.5 * a, None, 2.0 * a, cfg, T=1.0)
        assert (tr.final - 2.5 * a).norm() < 1e-14

    @given(seeds)
    def test_energy_conservation(self, seed):
        rng = np.random.default_rng(seed)
        u0 = random_field(lattice.ball(2), rng, 0.5)
        tr = resolve(u0, None, None, GalerkinConfig(cutoff=2, dt=1e-2), T=0.2)
        e = tr.norms(0) ** 2
        assert np.abs(e / e[0] - 1).max() < 1e-7

    def test_controlled_equals_forced(self, rng):
        cfg = GalerkinConfig(cutoff=2, dt=1e-2)
        u0 = random_field(lattice.ball(2), rng, 0.3)
        eta = _pwc(rng, [0.0, 0.4, 1.0], 0.3)
        a = resolve_controlled(u0, eta, None, cfg, record="final")
        b = resolve(u0, None, eta, cfg, record="final")
        assert (a.final - b.final).norm() < 1e-14

    def test_breakpoints_are_step_boundaries(self, rng):
        cfg = GalerkinConfig(cutoff=2, dt=0.3)
        eta = _pwc(rng, [0.0, 0.25, 1.0])
        tr = resolve(random_field(lattice.ball(1), rng), None, eta, cfg, record="segments")
        np.testing.assert_allclose(tr.times, [0.0, 0.25, 1.0])

    def test_guard_trips(self, rng):
        a = trig_mode((1, 0, 0), "cos", vector=(0, 1, 0))
        cfg = GalerkinConfig(cutoff=2, dt=0.01, guard_factor=2.0)
        with pytest.raises(BlowUpError):
            resolve(a, None, 10.0 * a, cfg, T=1.0)

    def test_initial_state_outside_cutoff(self):
        with pytest.raises(ValueError):
            resolve(trig_mode((3, 0, 0), "cos", vector=(0, 1, 0)), None, None, GalerkinConfig(cutoff=2), T=0.1)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            GalerkinConfig(cutoff=0)
        with pytest.raises(ValueError):
            GalerkinConfig(dt=-1.0)


class TestDiagnostics:
    def test_vorticity_of_shear(self):
        assert np.isclose(vorticity_sup(trig_mode((1, 0, 0), "cos", vector=(0, 1, 0)), 32), 1.0)

    @given(seeds)
    def test_pressure_matches_grid(self, seed):
        u = random_field(lattice.ball(2), np.random.default_rng(seed))
        ref = inverse_laplacian(-scalar_from_raw(grid_gradient_product(u, u, 16)))
        assert (pressure_recover(u) - ref).max_abs() < 1e-12 * max(1.0, ref.max_abs())

    def test_lipschitz_probe(self, rng):
        u0 = random_field(lattice.ball(2), rng, 0.05)
        du = random_field(lattice.ball(2), rng, 0.05)
        f = random_field(lattice.ball(1), rng, 0.1)
        rep = lipschitz_probe(u0, du, None, f, GalerkinConfig(cutoff=2, dt=1e-2), T=0.5)
        assert rep.stable(2.0)
        assert rep.time_ratio <= 1.1 * rep.rate_bound

    def test_export(self, tmp_path, rng):
        tr = resolve(random_field(lattice.ball(1), rng), None, None, GalerkinConfig(cutoff=2, dt=0.05), T=0.2)
        path = export_trajectory(tr, str(tmp_path), stride=2)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "t" and len(rows) == len(tr) + 1
        assert len(list(tmp_path.glob("trajectory_*.json"))) == 3
