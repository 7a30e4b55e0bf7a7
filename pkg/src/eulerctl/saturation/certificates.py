"""Certificates of membership in the saturation cone and their verification.

A certificate for ``xi`` is a decomposition ``xi = eta - sum_i alpha_i B(zeta_i)``
with ``eta, zeta_i`` in ``E`` and ``alpha_i > 0``.  Verification recomputes
the identity from scratch with the generic convolution, sharing no code with
the solvers that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from ..spectral import lattice
from ..spectral.convolution import get_plan
from ..spectral.fields import SpectralField
from ..spectral.grid import grid_oracle_advect
from ..spectral.operators import _project_arrays, bilinear_B, bilinear_B_sym, leray_project


@dataclass
class SaturationCertificate:
    """``target = eta - sum alpha_i B(zeta_i)``, all ``alpha_i > 0``.

    ``cutoff`` set means ``B`` is the Galerkin-truncated form ``P_M B``.
    """

    target: SpectralField
    eta: SpectralField
    alphas: np.ndarray
    zetas: list
    residual: float = float("nan")
    cutoff: int | None = None

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float).reshape(-1)
        if len(self.alphas) != len(self.zetas):
            raise ValueError("one alpha per zeta")
        if np.any(self.alphas <= 0):
            raise ValueError("certificate weights must be positive")

    @property
    def terms(self) -> list:
        return list(zip(self.alphas.tolist(), self.zetas))

    def __len__(self):
        return len(self.zetas)

    @property
    def alpha_sum(self) -> float:
        return float(self.alphas.sum())

    def scaled(self, s: float) -> "SaturationCertificate":
        """Certificate for ``s * target`` (``s > 0``) by scaling ``eta`` and the weights."""
        if not s > 0:
            raise ValueError("scale must be positive")
        return SaturationCertificate(s * self.target, s * self.eta, s * self.alphas, list(self.zetas), s * self.residual, self.cutoff)

    def as_dict(self) -> dict:
        from ..spectral import io

        return {
            "target": io.field_to_dict(self.target),
            "eta": io.field_to_dict(self.eta),
            "alphas": [float(a) for a in self.alphas],
            "zetas": [io.field_to_dict(z) for z in self.zetas],
            "residual": float(self.residual),
            "cutoff": self.cutoff,
        }


@dataclass
class CertifiedDirection:
    """A direction with certificates for both ``+direction`` and ``-direction``."""

    direction: SpectralField
    plus: SaturationCertificate
    minus: SaturationCertificate
    info: dict = field(default_factory=dict)

    def verified(self, tol: float = 1e-9) -> bool:
        return self.plus.residual < tol and self.minus.residual < tol


def certificate_sum(cert: SaturationCertificate) -> SpectralField:
    """``sum_i alpha_i B(zeta_i)`` evaluated on one shared convolution plan."""
    if len(cert) == 0:
        return SpectralField.zero()
    support = lattice.union(*[z.modes for z in cert.zetas])
    out_modes = lattice.ball(cert.cutoff) if cert.cutoff is not None else None
    plan = get_plan(support, support, out_modes)
    acc = np.zeros((len(plan.out_modes), 3), dtype=complex)
    zero = np.zeros(3, dtype=complex)
    for a, z in zip(cert.alphas, cert.zetas):
        d = z.dense(support)
        out, z0 = plan.advect(d, d)
        acc += a * out
        zero += a * z0
    scale = max(1.0, float(np.abs(acc).max(initial=0.0)))
    if np.abs(zero).max() > 1e-10 * scale:
        raise AssertionError("advection mean does not vanish in certificate terms")
    modes, coeffs = _project_arrays(plan.out_modes, acc)
    return SpectralField.from_dense(modes, coeffs)


def verify_certificate(cert: SaturationCertificate) -> float:
    """``||target - eta + sum alpha_i B(zeta_i)||_0`` recomputed from scratch."""
    total = cert.target - cert.eta + certificate_sum(cert)
    return total.norm(0)


def negate_pair_certificate(cert: SaturationCertificate, swap) -> SaturationCertificate:
    """Certificate for ``-target`` given a map sending each zeta to its partner.

    For single-fiber generators ``B(g - h) = -B(g + h)``, so swapping the
    signs inside every term flips the sign of the sum.
    """
    zetas = [swap(z) for z in cert.zetas]
    return SaturationCertificate(-cert.target, -cert.eta, cert.alphas.copy(), zetas, cutoff=cert.cutoff)


# -- dictionary-based certification (general subspaces) ------------------------


@dataclass
class DictionaryEntry:
    zeta: SpectralField
    image: SpectralField


def _truncate(f: SpectralField, cutoff):
    return f if cutoff is None else f.truncate(cutoff)


def b_image_dictionary(E, combo_depth: int = 2, cutoff: int | None = None) -> list:
    """Pairs ``(zeta, B(zeta))`` over the basis generators of ``E``.

    Depth 1 uses each generator ``g_i``; depth 2 adds ``+-g_i +- g_j`` for
    ``i < j`` (all four sign choices), giving ``q + 2 q (q - 1)`` entries
    for ``q`` generators.
    """
    if combo_depth not in (1, 2):
        raise ValueError("combo_depth must be 1 or 2")
    gens = list(E.generators)
    singles = [_truncate(bilinear_B(g), cutoff) for g in gens]
    out = [DictionaryEntry(g, b) for g, b in zip(gens, singles)]
    if combo_depth == 1:
        return out
    q = len(gens)
    for i in range(q):
        for j in range(i + 1, q):
            cross = _truncate(bilinear_B_sym(gens[i], gens[j]), cutoff)
            base = singles[i] + singles[j]
            bp = base + cross
            bm = base - cross
            out.append(DictionaryEntry(gens[i] + gens[j], bp))
            out.append(DictionaryEntry(gens[i] - gens[j], bm))
            out.append(DictionaryEntry(-gens[i] + gens[j], bm))
            out.append(DictionaryEntry(-gens[i] - gens[j], bp))
    return out


def _image_matrix(dictionary, E, modes):
    """Columns ``(I - P_E) B(zeta)`` in real coordinates, duplicates removed."""
    cols = []
    keep = []
    seen = set()
    for idx, entry in enumerate(dictionary):
        img = entry.image
        if len(img) == 0:
            continue
        perp = img - E.project(img)
        x = perp.to_real(modes) if len(perp) else np.zeros(6 * len(modes))
        nx = np.linalg.norm(x)
        if nx <= 1e-13 * max(1.0, img.norm(0)):
            continue
        key = np.round(x / nx, 12).tobytes()
        if key in seen:
            continue
        seen.add(key)
        cols.append(x)
        keep.append(idx)
    A = np.array(cols).T if cols else np.zeros((6 * len(modes), 0))
    return A, keep


def certify_direction(xi: SpectralField, dictionary, E, tol: float = 1e-9, cutoff: int | None = None):
    """Look for ``xi = eta - sum alpha_i B(zeta_i)`` over the dictionary.

    The ``E`` component of ``xi`` is absorbed into ``eta``; the remainder is
    fitted by nonnegative least squares on the dictionary images with their
    ``E`` components removed.  Returns a verified certificate, or ``None``
    when the residual stays above ``tol``.
    """
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    perp = xi - E.project(xi)
    if perp.norm(0) < tol:
        cert = SaturationCertificate(xi, E.project(xi), [], [], cutoff=cutoff)
        cert.residual = verify_certificate(cert)
        return cert if cert.residual < tol else None
    modes = lattice.union(perp.modes, *[d.image.modes for d in dictionary])
    A, idx = _image_matrix(dictionary, E, modes)
    if A.shape[1] == 0:
        return None
    b = -perp.to_real(modes)
    alpha, rnorm = nnls(A, b, maxiter=50 * A.shape[1])
    if rnorm > tol:
        return None
    keep = alpha > 1e-14 * max(alpha.max(initial=0.0), 1.0)
    zetas = [dictionary[idx[i]].zeta for i in np.flatnonzero(keep)]
    alphas = alpha[keep]
    partial = SaturationCertificate(xi, SpectralField.zero(), alphas, zetas, cutoff=cutoff)
    eta = E.project(xi + certificate_sum(partial))
    cert = SaturationCertificate(xi, eta, alphas, zetas, cutoff=cutoff)
    cert.residual = verify_certificate(cert)
    return cert if cert.residual < tol else None


def combine_certificates(xi: SpectralField, E, directions, tol: float = 1e-9, cutoff: int | None = None):
    """Certificate for ``xi`` in ``span(E + directions)``.

    ``directions`` must be orthonormal and orthogonal to ``E``.  Writing
    ``xi = P_E xi + sum c_l w_l`` the certificate stacks the plus (resp. minus)
    certificate of ``w_l`` scaled by ``|c_l|``.
    """
    eta = E.project(xi)
    rest = xi - eta
    alphas, zetas = [], []
    for d in directions:
        c = rest.inner(d.direction)
        if abs(c) < 1e-15:
            continue
        base = d.plus if c > 0 else d.minus
        eta = eta + abs(c) * base.eta
        alphas.extend((abs(c) * base.alphas).tolist())
        zetas.extend(base.zetas)
    cert = SaturationCertificate(xi, eta, alphas, zetas, cutoff=cutoff)
    cert.residual = verify_certificate(cert)
    if cert.residual >= tol:
        raise ValueError(f"xi is not in the certified span (residual {cert.residual:.3e})")
    return cert


# -- compact certificates (few large terms) ----------------------------------------


class _QuadraticImage:
    """``zeta -> (I - P_E) B(zeta)`` on ``E`` in real coordinates, with its derivative."""

    def __init__(self, E, cutoff):
        gens = list(E.basis)
        support = lattice.union(*[g.modes for g in gens])
        if cutoff is not None:
            out = lattice.ball(cutoff)
        else:
            out = None
        self.plan = get_plan(support, support, out)
        self.support = support
        self.out_modes = self.plan.out_modes
        self.G = np.array([g.dense(support) for g in gens])  # (q, K, 3)
        self.QE = np.array([_real(g, self.out_modes) for g in gens])
        m = self.out_modes.astype(float)
        self._m = m
        self._m_over = m / (m * m).sum(axis=1)[:, None]

    def _proj(self, out):
        return out - self._m * np.einsum("kj,kj->k", self._m_over, out)[:, None]

    def _perp(self, x):
        return x - self.QE.T @ (self.QE @ x)

    def field(self, a) -> SpectralField:
        return SpectralField.from_dense(self.support, np.tensordot(a, self.G, axes=1), prune=True)

    def value(self, a):
        z = np.tensordot(a, self.G, axes=1)
        return self._perp(_real_dense(self._proj(self.plan.advect(z, z)[0])))

    def jacobian(self, a):
        z = np.tensordot(a, self.G, axes=1)
        cols = []
        for g in self.G:
            out = self.plan.advect(z, g)[0] + self.plan.advect(g, z)[0]
            cols.append(self._perp(_real_dense(self._proj(out))))
        return np.array(cols).T


def _real(f, modes):
    d = f.dense(modes, strict=False)
    return np.sqrt(2.0) * np.concatenate([d.real.ravel(), d.imag.ravel()])


def _real_dense(d):
    return np.sqrt(2.0) * np.concatenate([d.real.ravel(), d.imag.ravel()])


def _gauss_newton(F, J, p, tol, max_iter=60):
    """Damped Gauss-Newton with minimal-norm steps for an underdetermined system.

    Minimal-norm steps keep the iterate close to its start, so the solution
    depends smoothly on the data instead of wandering along the solution
    manifold.
    """
    f = F(p)
    nf = np.linalg.norm(f)
    for _ in range(max_iter):
        if nf <= tol:
            break
        step = -np.linalg.lstsq(J(p), f, rcond=None)[0]
        lam = 1.0
        while True:
            pn = p + lam * step
            fn = F(pn)
            nn = np.linalg.norm(fn)
            if nn < (1.0 - 0.5 * lam) * nf or nn <= tol or lam < 1e-4:
                break
            lam *= 0.5
        if nn >= nf:
            break
        p, f, nf = pn, fn, nn
    return p, nf


def compact_certificate(xi: SpectralField, E, terms: int = 2, cutoff: int | None = None, tol: float = 1e-9, seed: int = 0, restarts: int = 4, image=None):
    """Certificate with ``terms`` unit-weight shifts found by Gauss-Newton.

    Solves ``(I - P_E)(xi + sum_k B(zeta_k)) = 0`` over ``zeta_k ∈ E`` from
    seeded random starts, then sets ``eta = P_E(xi + sum_k B(zeta_k))``.
    The weights are ``alpha_k = 1`` (any positive weight can be absorbed
    into ``zeta_k``).  The result is a smooth function of ``xi`` away from
    restart switches.  Returns a verified certificate or ``None``.
    """
    if image is None:
        image = _QuadraticImage(E, cutoff)
    q = len(image.G)
    target = image._perp(_real(xi, image.out_modes))
    nt = np.linalg.norm(target)
    if nt <= tol:
        cert = SaturationCertificate(xi, E.project(xi), [], [], cutoff=cutoff)
        cert.residual = verify_certificate(cert)
        return cert if cert.residual < tol else None
    scale = np.sqrt(nt / terms)

    def F(p):
        return target + sum(image.value(a) for a in p.reshape(terms, q))

    def J(p):
        return np.hstack([image.jacobian(a) for a in p.reshape(terms, q)])

    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        p0 = rng.normal(size=terms * q) * scale / np.sqrt(q)
        x, res = _gauss_newton(F, J, p0, 1e-4 * tol * max(1.0, nt))
        if res > 1e-3 * tol:
            continue
        zetas = [image.field(a) for a in x.reshape(terms, q)]
        partial = SaturationCertificate(xi, SpectralField.zero(), np.ones(terms), zetas, cutoff=cutoff)
        eta = E.project(xi + certificate_sum(partial))
        cert = SaturationCertificate(xi, eta, np.ones(terms), zetas, cutoff=cutoff)
        cert.residual = verify_certificate(cert)
        if cert.residual < tol:
            return cert
    return None


def verify_certificate_on_grid(cert: SaturationCertificate, grid_res: int | None = None) -> float:
    """:func:`verify_certificate` through pointwise products on a grid.

    ``B(zeta_i)`` is formed from grid values of ``zeta_i`` and its gradient,
    Leray-projected and truncated; it shares no code with the convolution
    plans.
    """
    total = cert.target - cert.eta
    for a, z in zip(cert.alphas, cert.zetas):
        res = grid_res or 2 * 2 * int(lattice.linf_norm(z.modes).max()) + 2
        b = leray_project(grid_oracle_advect(z, z, res))
        if cert.cutoff is not None:
            b = b.truncate(cert.cutoff)
        total = total + float(a) * b
    return total.norm(0)
