"""Convex rewriting of a certified force and per-vertex certificates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..saturation.certificates import (
    SaturationCertificate,
    _QuadraticImage,
    b_image_dictionary,
    certify_direction,
    combine_certificates,
    compact_certificate,
    verify_certificate,
)
from ..spectral import lattice
from ..spectral.fields import SpectralField
from ..spectral.operators import bilinear_B
from .pwc import FieldBasis, _real

SUM_TOL = 1e-12


@dataclass
class ConvexifiedForce:
    """``B(u) - target = sum_j lambdas[j] B(u + zetas[j]) - eta`` for every ``u``.

    ``cutoff`` set means ``B`` is the truncated ``P_M B`` throughout.
    """

    lambdas: np.ndarray
    zetas: list
    eta: SpectralField
    target: SpectralField | None = None
    cutoff: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if len(self.lambdas) != len(self.zetas):
            raise ValueError("one weight per shift")
        if len(self.lambdas):
            if np.any(self.lambdas <= 0):
                raise ValueError("weights must be positive")
            if abs(self.lambdas.sum() - 1.0) > SUM_TOL:
                raise ValueError("weights must sum to one")

    @property
    def p(self) -> int:
        return len(self.zetas)

    def _B(self, u):
        out = bilinear_B(u)
        return out if self.cutoff is None else out.truncate(self.cutoff)

    def residual(self, u: SpectralField) -> float:
        """``||B(u) - target - sum_j lambda_j B(u + zeta_j) + eta||_0``."""
        if self.target is None:
            raise ValueError("residual needs the target")
        lhs = self._B(u) - self.target
        rhs = -1.0 * self.eta
        if self.p == 0:
            rhs = rhs + self._B(u)
        for lam, z in zip(self.lambdas, self.zetas):
            rhs = rhs + lam * self._B(u + z)
        return (lhs - rhs).norm(0)

    def scaled_norm(self) -> float:
        """Largest ``||zeta_j||_0``."""
        return max((z.norm(0) for z in self.zetas), default=0.0)


def convexify(cert: SaturationCertificate) -> ConvexifiedForce:
    """Rewrite ``target = eta - sum_i alpha_i B(xi_i)`` as a convex combination.

    With ``alpha = sum alpha_i``: ``lambda_i = lambda_{i+n} = alpha_i / (2 alpha)``
    and ``zeta_i = -zeta_{i+n} = sqrt(alpha) xi_i``.  The cross terms cancel
    in pairs and ``sum_j lambda_j B(zeta_j) = sum_i alpha_i B(xi_i)``.
    An empty certificate gives the degenerate form with ``p = 0``.
    """
    n = len(cert)
    if n == 0:
        return ConvexifiedForce([], [], cert.eta, cert.target, cert.cutoff, {"alpha": 0.0})
    alpha = cert.alpha_sum
    root = np.sqrt(alpha)
    lam = np.concatenate([cert.alphas, cert.alphas]) / (2.0 * alpha)
    zetas = [root * z for z in cert.zetas] + [-root * z for z in cert.zetas]
    lam = lam / lam.sum()
    return ConvexifiedForce(lam, zetas, cert.eta, cert.target, cert.cutoff, {"alpha": alpha})


class VertexCertifier:
    """Certificates ``v = eta - sum alpha_i B(zeta_i)`` for vectors of ``E ⊕ span(directions)``.

    Methods are tried in order of certificate length.  ``compact`` solves
    for two (then three) unit-weight shifts by nonlinear least squares,
    ``dictionary`` runs nonnegative least squares over the depth-2
    generator dictionary, and stacking the certified directions of a
    saturation step is the fallback that always succeeds inside their span.
    Compact certificates keep the number of shifts per vertex tiny, which
    matters once the shifts are switched at high frequency.
    """

    def __init__(self, E, directions=(), cutoff: int | None = None, tol: float = 1e-9, use_dictionary: bool = True, compact_terms=(2, 3), seed: int = 0):
        self.E = E
        self.directions = list(directions)
        self.cutoff = cutoff
        self.tol = tol
        self.use_dictionary = use_dictionary
        self.compact_terms = tuple(compact_terms)
        self.seed = int(seed)
        self._dictionary = None
        self._image = None
        self.stats = {"empty": 0, "compact": 0, "dictionary": 0, "stacked": 0}

    @property
    def dictionary(self):
        if self._dictionary is None:
            self._dictionary = b_image_dictionary(self.E, 2, self.cutoff)
        return self._dictionary

    @property
    def image(self):
        if self._image is None:
            self._image = _QuadraticImage(self.E, self.cutoff)
        return self._image

    def span_basis(self) -> FieldBasis:
        return FieldBasis(list(self.E.basis) + [d.direction for d in self.directions])

    def certify(self, v: SpectralField) -> SaturationCertificate:
        tol = self.tol * max(1.0, v.norm(0))
        perp = v - self.E.project(v)
        if perp.norm(0) <= tol * 1e-3:
            cert = SaturationCertificate(v, v, [], [], cutoff=self.cutoff)
            cert.residual = verify_certificate(cert)
            self.stats["empty"] += 1
            return cert
        if len(self.E.basis):
            for terms in self.compact_terms:
                cert = compact_certificate(v, self.E, terms, self.cutoff, tol, seed=self.seed, image=self.image)
                if cert is not None:
                    self.stats["compact"] += 1
                    return cert
        if self.use_dictionary and len(self.E.basis):
            cert = certify_direction(v, self.dictionary, self.E, tol, self.cutoff)
            if cert is not None:
                self.stats["dictionary"] += 1
                return cert
        cert = combine_certificates(v, self.E, self.directions, tol, self.cutoff)
        self.stats["stacked"] += 1
        return _merge_terms(cert)


def _shift_key(z: SpectralField) -> bytes:
    x = np.round(z.coeffs.view(float).ravel(), 12)
    nz = np.flatnonzero(x)
    if len(nz) and x[nz[0]] < 0:
        x = -x
    return z.modes.tobytes() + (x + 0.0).tobytes()


def _merge_terms(cert: SaturationCertificate) -> SaturationCertificate:
    """Add up the weights of repeated shifts (``B`` is even, so ``+-zeta`` merge too)."""
    slot = {}
    alphas, zetas = [], []
    for a, z in zip(cert.alphas, cert.zetas):
        key = _shift_key(z)
        if key in slot:
            alphas[slot[key]] += float(a)
        else:
            slot[key] = len(zetas)
            alphas.append(float(a))
            zetas.append(z)
    out = SaturationCertificate(cert.target, cert.eta, alphas, zetas, cutoff=cert.cutoff)
    out.residual = verify_certificate(out)
    return out


def principal_directions(E, directions, samples, rel_tol: float = 1e-8) -> list:
    """Orthonormal principal directions of ``samples`` inside ``span(directions)``.

    The samples are first projected onto ``span(directions)`` (assumed
    orthonormal and orthogonal to ``E``); directions with singular value
    below ``rel_tol`` times the largest are dropped.
    """
    dirs = [d.direction if hasattr(d, "direction") else d for d in directions]
    samples = list(samples)
    if not dirs or not samples:
        return [], None
    modes = lattice.union(*[f.modes for f in dirs + samples])
    D = np.array([_real(f, modes) for f in dirs]).reshape(len(dirs), -1)
    X = np.array([_real(f, modes) for f in samples]) @ D.T @ D
    _, sv, Vt = np.linalg.svd(X, full_matrices=False)
    if not sv[0] > 0:
        return [], (modes, D)
    return [_fix_sign(v) for v, sig in zip(Vt, sv) if sig > rel_tol * sv[0]], (modes, D)


def adapted_basis(E, directions, samples, rel_tol: float = 1e-8) -> FieldBasis:
    """Orthonormal basis of ``E ⊕ span(directions)`` aligned with ``samples``.

    The basis of ``E`` comes first, then the principal directions of the
    components of ``samples`` inside ``span(directions)`` (by decreasing
    singular value), then the remaining directions completed by
    Gram-Schmidt.
    """
    eb = list(E.basis)
    dirs = [d.direction for d in directions]
    basis, packed = principal_directions(E, dirs, samples, rel_tol)
    if packed is None:
        modes = lattice.union(*[f.modes for f in eb + dirs])
        D = np.array([_real(f, modes) for f in dirs]).reshape(len(dirs), -1)
    else:
        modes, D = packed
    basis = list(basis)
    for d in D:
        r = d.copy()
        for _ in range(2):
            for b in basis:
                r -= (r @ b) * b
        nr = np.linalg.norm(r)
        if nr > 1e-8:
            basis.append(r / nr)
    if len(basis) != len(D):
        raise ValueError("adapted basis lost rank")
    return FieldBasis(eb + [SpectralField.from_real(modes, b, prune=True) for b in basis])


def _fix_sign(v):
    """Sign convention for singular vectors: largest entry positive."""
    return v if v[np.argmax(np.abs(v))] >= 0 else -v
