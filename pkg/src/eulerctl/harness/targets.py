"""Deterministic pseudorandom targets."""

from __future__ import annotations

import numpy as np

from ..spectral import lattice
from ..spectral.fields import ScalarSpectralField, SpectralField, random_field, random_scalar

STREAMS = {"target": 1, "initial": 2, "pressure": 3, "probe": 4}


def _rng(seed: int, stream: str):
    return np.random.default_rng([int(seed), STREAMS[stream]])


def _modes(spec):
    if "modes" in spec:
        modes = lattice.sort_modes(lattice.canonicalize(np.asarray(spec["modes"], dtype=np.int64))[0])
        return lattice.unique_modes(modes)
    r = int(spec["radius"])
    return lattice.ball(r) if r > 0 else lattice.EMPTY_MODES.copy()


def generate_target(spec: dict, seed: int, stream: str = "target") -> SpectralField:
    """Gaussian divergence-free field on the requested modes, scaled to ``||u||_k = norm``.

    ``spec`` holds ``radius`` (l1 ball of modes) or an explicit ``modes``
    list, plus ``norm`` and ``k``.  The draw depends only on ``seed`` and the
    named ``stream``.

    Raises
    ------
    ValueError
        If the mode set is empty.
    """
    modes = _modes(spec)
    if len(modes) == 0:
        raise ValueError("target subspace is empty")
    norm = float(spec.get("norm", 1.0))
    if norm == 0:
        return SpectralField.zero()
    u = random_field(modes, _rng(seed, stream), 1.0)
    return (norm / u.norm(float(spec.get("k", 0.0)))) * u


def generate_pressure_target(spec: dict, seed: int) -> ScalarSpectralField:
    """Scalar analogue of :func:`generate_target` (stream ``pressure``)."""
    modes = _modes(spec)
    if len(modes) == 0:
        raise ValueError("target subspace is empty")
    norm = float(spec.get("norm", 1.0))
    if norm == 0:
        return ScalarSpectralField.zero()
    p = random_scalar(modes, _rng(seed, "pressure"), 1.0)
    return (norm / p.norm(float(spec.get("k", 0.0)))) * p


def reference_pair(seed: int = 1, radius: int = 2, norm: float = 3.0, k: float = 4.0):
    """``(u_hat, u0)`` drawn in that order from one ``default_rng(seed)`` on the l1 ball.

    Both are normalized to ``||.||_k = norm``.  This is the reference
    steering instance of the acceptance suite.
    """
    rng = np.random.default_rng(seed)
    modes = lattice.ball(radius)
    u_hat = random_field(modes, rng, 1.0)
    u0 = random_field(modes, rng, 1.0)
    return (norm / u_hat.norm(k)) * u_hat, (norm / u0.norm(k)) * u0
