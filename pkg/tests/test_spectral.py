import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eulerctl.spectral import (
    ModeSubspace,
    bilinear_B,
    bilinear_B_sym,
    canonical_frame,
    curl,
    grid_oracle_advect,
    heat_semigroup,
    inverse_laplacian,
    laplacian,
    lattice,
    leray_project,
    random_field,
    random_scalar,
    rotated,
    trig_mode,
)
from eulerctl.spectral import io as field_io
from eulerctl.spectral.fields import ScalarSpectralField, SpectralField

seeds = st.integers(min_value=0, max_value=2**31 - 1)
radii = st.integers(min_value=1, max_value=3)


class TestLattice:
    def test_ball_sizes(self):
        # canonical half of the punctured l1 ball
        assert [len(lattice.ball(r)) for r in (1, 2, 3)] == [3, 12, 31]

    def test_ball_is_canonical(self):
        assert lattice.is_canonical(lattice.ball(3)).all()

    @given(st.lists(st.tuples(*[st.integers(-4, 4)] * 3), min_size=1, max_size=20))
    def test_canonicalize_picks_one_of_each_pair(self, pts):
        modes = np.array([p for p in pts if any(p)], dtype=np.int64).reshape(-1, 3)
        canon, flipped = lattice.canonicalize(modes)
        assert lattice.is_canonical(canon).all()
        np.testing.assert_array_equal(np.where(flipped[:, None], -canon, canon), modes)

    def test_lookup_missing(self):
        idx = lattice.lookup(lattice.ball(1), np.array([[1, 0, 0], [5, 0, 0]]))
        assert idx[0] >= 0 and idx[1] < 0


class TestFields:
    @given(seeds, radii)
    def test_random_field_divergence_free(self, seed, r):
        u = random_field(lattice.ball(r), np.random.default_rng(seed))
        assert u.divergence_residual() < 1e-12

    def test_same_seed_same_field(self):
        a = random_field(lattice.ball(2), np.random.default_rng(3))
        b = random_field(lattice.ball(2), np.random.default_rng(3))
        assert (a - b).norm() == 0.0

    def test_trig_mode_pointwise(self):
        u = trig_mode((1, 0, 0), "cos", vector=(0, 1, 0))
        x = np.array([[0.3, 1.1, -0.4]])
        np.testing.assert_allclose(u.evaluate(x)[0], [0.0, np.cos(0.3), 0.0], atol=1e-14)
        s = trig_mode((0, 2, 0), "sin", vector=(1, 0, 0), amplitude=2.0)
        np.testing.assert_allclose(s.evaluate(x)[0], [2 * np.sin(2.2), 0.0, 0.0], atol=1e-14)

    @given(seeds)
    def test_norm_homogeneous(self, seed):
        u = random_field(lattice.ball(2), np.random.default_rng(seed))
        assert np.isclose((-2.5 * u).norm(4), 2.5 * u.norm(4))

    @given(seeds)
    def test_l2_norm_matches_grid_average(self, seed):
        u = random_field(lattice.ball(2), np.random.default_rng(seed))
        g = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        X = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
        mean_sq = np.mean(np.sum(u.evaluate(X) ** 2, axis=1))
        assert np.isclose(u.norm(0) ** 2, mean_sq, rtol=1e-10)

    def test_real_coordinates_roundtrip(self, rng):
        modes = lattice.ball(2)
        u = random_field(modes, rng)
        v = SpectralField.from_real(modes, u.to_real(modes))
        assert (u - v).norm() < 1e-14
        assert np.isclose(np.linalg.norm(u.to_real(modes)), u.norm(0))

    def test_raw_field_is_rejected_when_not_solenoidal(self):
        with pytest.raises(ValueError):
            SpectralField.from_raw({(1, 0, 0): np.array([1.0, 0, 0])})


class TestOperators:
    def test_bilinear_closed_form(self):
        # a = cos(x2) e1, b = sin(x1) e2: (a.grad) b = cos x1 cos x2 e2
        a = trig_mode((0, 1, 0), "cos", vector=(1, 0, 0))
        b = trig_mode((1, 0, 0), "sin", vector=(0, 1, 0))
        out = bilinear_B(a, b)
        x = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, 3))
        expect = np.zeros((20, 3))
        for s in (1, -1):
            m = np.array([1.0, s, 0.0])
            v = np.array([0.0, 1.0, 0.0]) - (s / 2.0) * m
            expect += 0.5 * np.cos(x @ m)[:, None] * v
        np.testing.assert_allclose(out.evaluate(x), expect, atol=1e-13)

    def test_shear_flow_is_steady(self):
        a = trig_mode((1, 0, 0), "cos", vector=(0, 1, 0))
        assert bilinear_B(a).norm() < 1e-15

    @given(seeds)
    def test_matches_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_field(lattice.ball(2), rng), random_field(lattice.ball(2), rng)
        ref = leray_project(grid_oracle_advect(a, b, 16))
        assert (bilinear_B(a, b) - ref).norm() < 1e-10 * max(1.0, ref.norm())

    @given(seeds)
    def test_skew_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_field(lattice.ball(3), rng), random_field(lattice.ball(2), rng)
        assert abs(bilinear_B(a, b).inner(b)) < 1e-12 * (1 + a.norm(1) * b.norm() ** 2)

    @given(seeds)
    def test_symmetric_form(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_field(lattice.ball(2), rng), random_field(lattice.ball(2), rng)
        lhs = bilinear_B(a + b) - bilinear_B(a) - bilinear_B(b)
        assert (lhs - bilinear_B_sym(a, b)).norm() < 1e-12 * (1 + lhs.norm())

    def test_leray_idempotent(self, rng):
        raw = grid_oracle_advect(random_field(lattice.ball(2), rng), random_field(lattice.ball(2), rng), 16)
        p = leray_project(raw)
        assert (leray_project({tuple(m): c for m, c in zip(p.modes, p.coeffs)}) - p).norm() < 1e-14

    def test_heat_semigroup_damps_each_mode(self):
        u = 3.0 * trig_mode((1, 1, 0), "cos", vector=(0, 0, 1))
        v = heat_semigroup(u, 0.25)
        assert np.isclose(v.norm(), np.exp(-0.25 * 2) * u.norm())

    def test_laplacian_inverse(self, rng):
        f = random_scalar(lattice.ball(3), rng)
        assert (laplacian(inverse_laplacian(f)) - f).norm() < 1e-14

    def test_curl_is_solenoidal(self, rng):
        assert curl(random_field(lattice.ball(3), rng)).divergence_residual() < 1e-13


class TestFrames:
    @given(st.tuples(*[st.integers(-3, 3)] * 3).filter(any))
    def test_orthonormal_and_transverse(self, m):
        m = tuple(int(x) for x in lattice.canonicalize(np.array([m]))[0][0])
        f = canonical_frame(m)
        for fr in (f, rotated(f, 0.7)):
            M = np.array([fr.l_plus, fr.l_minus])
            np.testing.assert_allclose(M @ M.T, np.eye(2), atol=1e-14)
            np.testing.assert_allclose(M @ np.array(m, dtype=float), 0.0, atol=1e-14)


class TestSubspace:
    def test_ball_dimension(self):
        assert ModeSubspace.ball(2).dim == 4 * 12

    def test_projection(self, rng):
        S = ModeSubspace.ball(1)
        u = random_field(lattice.ball(3), rng)
        p = S.project(u)
        assert S.contains(p)
        assert abs((u - p).inner(p)) < 1e-12


class TestIO:
    @given(seeds)
    def test_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        for u in (random_field(lattice.ball(2), rng), random_scalar(lattice.ball(2), rng)):
            v = field_io.loads(field_io.dumps(u))
            assert type(v) is type(u)
            assert (u - v).norm() == 0.0

    def test_save_load(self, tmp_path, rng):
        p = random_scalar(lattice.ball(1), rng)
        field_io.save(p, tmp_path / "p.json")
        q = field_io.load(tmp_path / "p.json")
        assert isinstance(q, ScalarSpectralField) and (p - q).norm() == 0.0
