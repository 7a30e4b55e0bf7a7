import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eulerctl.pressure import (
    PressureTarget,
    a_lipschitz_constant,
    export_quadruples_csv,
    lift_blocks,
    lift_family,
    pressure_lift,
    quadratic_form_A,
    select_wavevectors,
    validate_quadruples,
)
from eulerctl.pressure.lift import m_vector
from eulerctl.sim import pressure_recover
from eulerctl.spectral import lattice, random_field, random_scalar

seeds = st.integers(min_value=0, max_value=2**31 - 1)
STRATEGIES = ("paper_formula", "minimal_norm")


class TestQuadraticForm:
    @given(seeds)
    def test_matches_pressure_recovery(self, seed):
        u = random_field(lattice.ball(3), np.random.default_rng(seed))
        ref = pressure_recover(u).restrict(lattice.ball(2))
        assert (quadratic_form_A(u, m=2) - ref).norm() < 1e-12 * max(1.0, ref.norm())

    @given(seeds)
    def test_difference_identity(self, seed):
        rng = np.random.default_rng(seed)
        u, w = random_field(lattice.ball(2), rng), random_field(lattice.ball(2), rng)
        lhs = quadratic_form_A(u, m=1) - quadratic_form_A(w, m=1)
        rhs = quadratic_form_A(u - w, u + w, m=1)
        assert (lhs - rhs).norm() < 1e-12 * max(1.0, lhs.norm())

    @given(seeds, st.floats(1e-3, 1.0))
    def test_lipschitz_constant_bounds_increment(self, seed, scale):
        rng = np.random.default_rng(seed)
        u = random_field(lattice.ball(2), rng)
        d = random_field(lattice.ball(2), rng, scale)
        C = a_lipschitz_constant(2 * u + d, 1, 2, 4.0)
        inc = (quadratic_form_A(u + d, m=1) - quadratic_form_A(u, m=1)).norm(4)
        assert inc <= C * d.norm(4) * (1 + 1e-10)


class TestWavevectors:
    @pytest.mark.parametrize("strategy", STRATEGIES)
    @pytest.mark.parametrize("m", [1, 2])
    def test_family_validates(self, m, strategy):
        fam = lift_family(m, strategy)
        assert set(fam) == {tuple(int(x) for x in n) for n in lattice.ball(m)}
        assert validate_quadruples(fam, m) == []

    def test_minimal_norm_is_smaller(self):
        for m in (1, 2):
            a = max(q.max_l1() for q in lift_family(m, "paper_formula").values())
            b = max(q.max_l1() for q in lift_family(m, "minimal_norm").values())
            assert b < a

    def test_unit_ball_minimal_family(self):
        q = select_wavevectors((1, 0, 0), 1, "minimal_norm")
        assert q.max_l1() <= 4
        assert np.array_equal(q.ks[1] - q.ks[0], [1, 0, 0])

    def test_validator_reports_violations(self):
        q = select_wavevectors((1, 0, 0), 1, "minimal_norm")
        bad = type(q)(q.n, (1, 0, 0), (2, 0, 0), q.k3, q.k4, q.phi_n, q.m_of_n, q.strategy)
        msgs = validate_quadruples([bad], 1)
        assert any("<= 2m" in s for s in msgs) and any("parallel" in s for s in msgs)

    def test_target_mode_out_of_range(self):
        with pytest.raises(ValueError):
            select_wavevectors((2, 0, 0), 1)
        with pytest.raises(ValueError):
            select_wavevectors((-1, 0, 0), 1)

    def test_m_vector_is_lattice_point(self):
        for n in lattice.ball(2):
            assert m_vector(n, 2).dtype.kind == "i"

    def test_export(self, tmp_path):
        n = export_quadruples_csv(lift_family(1, "paper_formula"), tmp_path / "q.csv")
        with open(tmp_path / "q.csv") as fh:
            rows = list(csv.reader(fh))
        assert n == 3 and len(rows) == 4 and rows[0][0] == "n"


class TestLift:
    @pytest.mark.parametrize("rule", ["fixed", "balanced"])
    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_solves_pressure_equation(self, strategy, rule, rng):
        for m in (1, 2):
            quads = lift_family(m, strategy)
            u = random_field(lattice.ball(m), rng)
            p = random_scalar(lattice.ball(m), rng)
            v = pressure_lift(PressureTarget(m, u, p), quads, rule)
            assert (quadratic_form_A(u + v, m=m) - p).norm() < 1e-10 * max(1.0, p.norm())
            assert len(v) and lattice.l1_norm(v.modes).min() > 2 * m

    def test_consistent_target_needs_no_lift(self, rng):
        u = random_field(lattice.ball(1), rng)
        v = pressure_lift(PressureTarget(1, u, quadratic_form_A(u, m=1)), lift_family(1, "minimal_norm"))
        assert v.norm() == 0.0

    def test_blocks_scale(self, rng):
        u = random_field(lattice.ball(1), rng)
        p = random_scalar(lattice.ball(1), rng)
        quads = lift_family(1, "minimal_norm")
        blocks = lift_blocks(PressureTarget(1, u, p), quads, "balanced")
        for b in blocks:
            assert np.isclose(abs(b.C1), abs(b.D2)) and np.isclose(abs(b.C3), abs(b.C4))

    def test_target_must_lie_in_Fm(self, rng):
        with pytest.raises(ValueError):
            PressureTarget(1, random_field(lattice.ball(2), rng), random_scalar(lattice.ball(1), rng))

    def test_unknown_rule(self, rng):
        u = random_field(lattice.ball(1), rng)
        with pytest.raises(ValueError):
            pressure_lift(PressureTarget(1, u, random_scalar(lattice.ball(1), rng)), lift_family(1, "minimal_norm"), "other")
