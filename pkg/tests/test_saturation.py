import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eulerctl.saturation import (
    FiberSubspace,
    SaturationCertificate,
    certificate_sum,
    coeffs_to_fiber,
    fiber_frames,
    fiber_to_coeffs,
    generator_space,
    saturation_sequence,
    saturation_step,
    verify_certificate,
    verify_certificate_on_grid,
)
from eulerctl.spectral import bilinear_B, lattice, random_field


@pytest.fixture(scope="module")
def step1():
    return saturation_step(generator_space(1), cutoff=2)


class TestFiberSubspace:
    def test_ball_dimension(self):
        assert generator_space(2).dim == 4 * len(lattice.ball(2))

    def test_fiber_coordinates_roundtrip(self, rng):
        modes = lattice.ball(2)
        fr = fiber_frames(modes)
        c = random_field(modes, rng).dense(modes)
        np.testing.assert_allclose(fiber_to_coeffs(coeffs_to_fiber(c, fr), fr), c, atol=1e-14)

    def test_project_is_orthogonal(self, rng):
        E = FiberSubspace.ball(1)
        u = random_field(lattice.ball(2), rng)
        p = E.project(u)
        assert E.contains(p)
        assert abs((u - p).inner(p)) < 1e-12
        assert abs(E.residual(u) - (u - p).norm()) < 1e-12

    def test_rejects_multi_fiber_generator(self, rng):
        with pytest.raises(ValueError):
            FiberSubspace.from_fields([random_field(lattice.ball(1), rng)])

    def test_non_orthonormal_block(self):
        with pytest.raises(ValueError):
            FiberSubspace(np.array([[1, 0, 0]]), [np.array([[1.0, 1.0, 0, 0]])])


class TestCertificates:
    def test_positive_weights_required(self, rng):
        z = random_field(lattice.ball(1), rng)
        with pytest.raises(ValueError):
            SaturationCertificate(z, z, np.array([-1.0]), [z])

    def test_handmade_certificate(self, rng):
        z = random_field(lattice.ball(1), rng)
        eta = random_field(lattice.ball(1), rng)
        target = eta - 0.5 * bilinear_B(z)
        cert = SaturationCertificate(target, eta, np.array([0.5]), [z])
        assert verify_certificate(cert) < 1e-14
        assert verify_certificate_on_grid(cert) < 1e-13
        sc = cert.scaled(3.0)
        assert verify_certificate(sc) < 1e-13
        assert (certificate_sum(sc) - 3.0 * certificate_sum(cert)).norm() < 1e-13

    def test_certificates_match_both_routes(self, step1):
        for d in step1.directions:
            for cert in (d.plus, d.minus):
                assert verify_certificate(cert) < 1e-9
                assert verify_certificate_on_grid(cert) < 1e-9
            assert (d.plus.target + d.minus.target).norm() < 1e-12


class TestSaturationStep:
    def test_single_fiber_is_saturated(self):
        # a(x) . m = 0 for a single wavevector, so B vanishes on its fiber
        E = FiberSubspace.from_modes(np.array([[1, 0, 0]]))
        assert saturation_step(E, cutoff=3).added == 0

    def test_unit_ball_generators(self, step1):
        E = generator_space(1)
        assert step1.E1.dim > E.dim
        assert step1.E1.contains_subspace(E)
        # new directions live on the sums of two generator modes
        for d in step1.directions:
            assert d.direction.max_l1() == 2
            assert abs(d.direction.norm() - 1.0) < 1e-12

    def test_directions_orthogonal_to_E(self, step1):
        E = generator_space(1)
        for d in step1.directions:
            assert E.residual(d.direction) > 1 - 1e-12

    def test_dense_route_agrees(self, step1):
        other = saturation_step(generator_space(1, fiber=False), cutoff=2, method="dense")
        assert other.E1.dim == step1.E1.dim

    def test_sequence_monotone(self):
        rep = saturation_sequence(generator_space(1), 2, cutoff=3)
        assert all(a < b for a, b in zip(rep.dims, rep.dims[1:]))
        for i in range(len(rep.dims) - 1):
            for m, d in rep.fiber_map[i].items():
                assert rep.fiber_map[i + 1][m] >= d
        doc = rep.as_dict()
        assert doc["dims"] == rep.dims and doc["max_certificate_residual"] < 1e-9

    @given(st.integers(0, 2**31 - 1))
    def test_elements_of_E1_are_certified(self, step1, seed):
        # a random element of span(new directions) is xi = sum c_l w_l
        rng = np.random.default_rng(seed)
        step = step1
        c = rng.normal(size=len(step.directions))
        xi = sum((ci * d.direction for ci, d in zip(c, step.directions)), start=0 * step.directions[0].direction)
        total = sum(
            ((abs(ci) * (d.plus if ci > 0 else d.minus).eta) for ci, d in zip(c, step.directions)),
            start=0 * xi,
        )
        total = total - sum(
            (abs(ci) * certificate_sum(d.plus if ci > 0 else d.minus) for ci, d in zip(c, step.directions)),
            start=0 * xi,
        )
        assert (total - xi).norm() < 1e-9 * (1 + np.abs(c).sum())

