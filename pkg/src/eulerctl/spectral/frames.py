"""Polarization frames: orthonormal pairs spanning the plane orthogonal to m."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice


@dataclass(frozen=True)
class PolarizationFrame:
    """Orthonormal basis ``{l_plus, l_minus}`` of the plane ``m^perp``.

    ``m`` is always the canonical representative.  By convention the
    polarization of ``m`` itself is ``l_plus`` and that of ``-m`` is
    ``l_minus``; ``(l_plus, l_minus, m/|m|)`` is right-handed.
    """

    m: tuple
    l_plus: np.ndarray
    l_minus: np.ndarray

    def polarization(self, sign: int = 1) -> np.ndarray:
        return self.l_plus if sign > 0 else self.l_minus


def frame_vectors(modes) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized canonical frames for an array of canonical wavevectors.

    The rule: take the first standard basis vector ``e`` not parallel to
    ``m``, Gram-Schmidt it against ``m`` to get ``l_plus``, and set
    ``l_minus = m x l_plus / |m|``.
    """
    m = lattice.as_modes(modes).astype(float)
    if len(m) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    if np.any(np.all(m == 0, axis=1)):
        raise ValueError("zero wavevector has no polarization frame")
    # e1 is parallel to m iff m2 = m3 = 0; e2 is then never parallel.
    use_e2 = (m[:, 1] == 0) & (m[:, 2] == 0)
    e = np.zeros_like(m)
    e[~use_e2, 0] = 1.0
    e[use_e2, 1] = 1.0
    msq = (m * m).sum(axis=1)
    lp = e - m * ((e * m).sum(axis=1) / msq)[:, None]
    lp /= np.linalg.norm(lp, axis=1)[:, None]
    lm = np.cross(m, lp) / np.sqrt(msq)[:, None]
    return lp, lm


def canonical_frame(m) -> PolarizationFrame:
    """Deterministic frame of the canonical representative of ``m``.

    ``canonical_frame(m)`` and ``canonical_frame(-m)`` return the same frame.
    """
    m = np.asarray(m, dtype=np.int64).reshape(3)
    if not np.any(m):
        raise ValueError("zero wavevector has no polarization frame")
    c, _ = lattice.canonicalize(m[None])
    lp, lm = frame_vectors(c)
    return PolarizationFrame(tuple(int(x) for x in c[0]), lp[0], lm[0])


def polarization(m) -> np.ndarray:
    """The vector ``l(m)``: ``l_plus`` for canonical m, ``l_minus`` otherwise."""
    m = np.asarray(m, dtype=np.int64).reshape(3)
    frame = canonical_frame(m)
    return frame.l_plus if lattice.is_canonical(m[None])[0] else frame.l_minus


def rotated(frame: PolarizationFrame, angle: float) -> PolarizationFrame:
    """Rotate the frame by ``angle`` inside its plane."""
    c, s = np.cos(angle), np.sin(angle)
    lp = c * frame.l_plus + s * frame.l_minus
    lm = -s * frame.l_plus + c * frame.l_minus
    return PolarizationFrame(frame.m, lp, lm)
