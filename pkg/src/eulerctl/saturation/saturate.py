"""Certified under-approximation of the saturation operator and its iterates.

Two engines are provided.

``dense``
    Builds the depth-2 dictionary over the generators of ``E``, takes the
    orthonormal basis of the span of its images minus ``E`` (in decreasing
    image magnitude) as candidates, and certifies each candidate and its
    negative by nonnegative least squares.  Suitable for small ``E``.

``fiber``
    For subspaces that split along mode fibers.  Every generator then has
    ``B(g) = 0``, so ``B(g + h) = -B(g - h) = B~(g, h)`` and the cone spanned by
    the dictionary images is a linear space.  For each pair of fibers the
    images of all generator pairs are combined so that the contribution at
    one of the two output wavevectors lies in ``E``; what is left is a
    direction supported on a single output fiber, certified in both signs by
    the combination weights.  Certificates stay short (a few generator
    pairs) and the result is again a fiber subspace, so the construction
    iterates without dense linear algebra.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..spectral import lattice
from ..spectral.fields import SpectralField
from ..spectral.subspace import ModeSubspace
from .certificates import (
    CertifiedDirection,
    SaturationCertificate,
    b_image_dictionary,
    certify_direction,
    verify_certificate,
)
from .fibers import FiberSubspace, coeffs_to_fiber, fiber_frames, fiber_to_coeffs, pair_images

LOCAL_TOL = 1e-6


@dataclass
class SaturationStep:
    """Result of one saturation step: the enlarged space and its witnesses."""

    E: object
    E1: object
    directions: list
    info: dict = field(default_factory=dict)

    @property
    def added(self) -> int:
        return self.E1.dim - self.E.dim


def _as_fiber(E):
    if isinstance(E, FiberSubspace):
        return E
    try:
        return FiberSubspace.from_subspace(E)
    except ValueError:
        return None


def saturation_step(E, combo_depth: int = 2, tol: float = 1e-9, cutoff: int | None = None, method: str = "auto", max_fibers: int | None = None):
    """One certified step ``E -> E1`` with ``E ⊆ E1 ⊆ F(E)``.

    Parameters
    ----------
    E : ModeSubspace or FiberSubspace
    combo_depth : {1, 2}
        Depth 1 combinations produce nothing new for single-fiber
        generators; the fiber engine therefore requires depth 2.
    tol : float
        Certificate residual threshold.
    cutoff : int, optional
        Use the Galerkin-truncated ``P_M B`` with ``M = cutoff``.
    method : {"auto", "dense", "fiber"}
        ``auto`` picks ``fiber`` whenever ``E`` splits along fibers.
    max_fibers : int, optional
        Only extend the ``max_fibers`` output fibers of smallest l1 norm
        (a budget for large stages; the result is still sound).

    Returns
    -------
    SaturationStep
    """
    if combo_depth not in (1, 2):
        raise ValueError("combo_depth must be 1 or 2")
    if method not in ("auto", "dense", "fiber"):
        raise ValueError(f"unknown method {method!r}")
    fe = _as_fiber(E) if method in ("auto", "fiber") else None
    if method == "fiber" and fe is None:
        raise ValueError("the fiber engine needs a subspace that splits along fibers")
    if fe is not None:
        if combo_depth == 1:
            return SaturationStep(fe, fe, [], {"method": "fiber", "candidates": 0})
        return _fiber_step(fe, tol, cutoff, max_fibers)
    return _dense_step(E, combo_depth, tol, cutoff)


# -- dense engine ---------------------------------------------------------------


def _dense_step(E, combo_depth, tol, cutoff):
    dictionary = b_image_dictionary(E, combo_depth, cutoff)
    modes = lattice.union(E.modes, *[d.image.modes for d in dictionary])
    images = []
    for d in dictionary:
        if len(d.image):
            perp = d.image - E.project(d.image)
            nrm = perp.norm(0)
            if nrm > 1e-12:
                images.append((nrm, perp))
    images.sort(key=lambda p: -p[0])
    basis = []
    for _, img in images:
        x = img.to_real(modes)
        for _ in range(2):
            for b in basis:
                x = x - (b @ x) * b
        nx = np.linalg.norm(x)
        if nx > 1e-9 * max(1.0, np.linalg.norm(img.to_real(modes))):
            basis.append(x / nx)
    certified = []
    for x in basis:
        w = SpectralField.from_real(modes, x)
        plus = certify_direction(w, dictionary, E, tol, cutoff)
        if plus is None:
            continue
        minus = certify_direction(-w, dictionary, E, tol, cutoff)
        if minus is None:
            continue
        certified.append(CertifiedDirection(w, plus, minus, {"engine": "dense"}))
    if isinstance(E, FiberSubspace):
        E = E.to_dense()
    E1, _ = E.extended([d.direction for d in certified], tol=1e-8)
    return SaturationStep(E, E1, certified, {"method": "dense", "candidates": len(basis), "dictionary": len(dictionary)})


# -- fiber engine ---------------------------------------------------------------


class _Generators:
    """Flat table of single-fiber generators of a fiber subspace."""

    def __init__(self, E: FiberSubspace):
        self.E = E
        mode_idx, coeffs = [], []
        for i, (fr, blk) in enumerate(zip(E.frames, E.blocks)):
            for row in blk:
                mode_idx.append(i)
                coeffs.append(fiber_to_coeffs(row, fr))
        self.mode_idx = np.array(mode_idx, dtype=np.int64)
        self.coeffs = np.array(coeffs, dtype=complex).reshape(-1, 3)
        self.by_mode = [np.flatnonzero(self.mode_idx == i) for i in range(len(E.modes))]

    def field(self, g: int, sign: float = 1.0) -> SpectralField:
        m = self.E.modes[self.mode_idx[g]]
        return SpectralField._trusted(m[None].copy(), (sign * self.coeffs[g])[None])

    def combo(self, a: int, b: int, sign: float) -> SpectralField:
        """``g_a + sign * g_b`` on two distinct fibers."""
        ma = self.E.modes[self.mode_idx[a]]
        mb = self.E.modes[self.mode_idx[b]]
        modes = np.array([ma, mb])
        coeffs = np.array([self.coeffs[a], sign * self.coeffs[b]])
        order = np.argsort(lattice.keys(modes))
        return SpectralField._trusted(modes[order], coeffs[order])


def _null_rows(X: np.ndarray, tol: float) -> np.ndarray:
    """Batched left null spaces: rows ``c`` with ``c @ X = 0`` for each ``X`` in the batch."""
    P, k, _ = X.shape
    u, s, _ = np.linalg.svd(X, full_matrices=True)
    scale = np.maximum(s.max(axis=1, initial=0.0), 1.0)
    rank = (s > tol * scale[:, None]).sum(axis=1)
    return u, rank


def _fiber_step(E: FiberSubspace, tol: float, cutoff, max_fibers):
    gens = _Generators(E)
    K = len(E.modes)
    if K < 2:
        return SaturationStep(E, E, [], {"method": "fiber", "candidates": 0})
    directions_by_mode: dict = {}
    # Fiber pairs, grouped by the number of generator pairs k = d_i d_j.
    ii, jj = np.triu_indices(K, 1)
    dims = np.array([len(b) for b in E.blocks])
    kk = dims[ii] * dims[jj]
    local = []  # (output key, vector(4), combos (k,), gen a list, gen b list, s, pair order)
    for k in np.unique(kk):
        sel = np.flatnonzero(kk == k)
        pi, pj = ii[sel], jj[sel]
        # Generator pairs for each fiber pair, in a fixed order.
        ga = np.array([[a for a in gens.by_mode[i] for _ in gens.by_mode[j]] for i, j in zip(pi, pj)])
        gb = np.array([[b for _ in gens.by_mode[i] for b in gens.by_mode[j]] for i, j in zip(pi, pj)])
        P = len(sel)
        a = gens.coeffs[ga.ravel()]
        b = gens.coeffs[gb.ravel()]
        m = np.repeat(E.modes[pi], k, axis=0)
        n = np.repeat(E.modes[pj], k, axis=0)
        tp, cp, tm, cm = pair_images(a, m, b, n)
        Xs = []
        for t, c in ((tp, cp), (tm, cm)):
            x = coeffs_to_fiber(c, fiber_frames(t))
            if cutoff is not None:
                x[lattice.l1_norm(t) > cutoff] = 0.0
            proj = E.complement_projector(t)
            x = np.einsum("pij,pj->pi", proj, x)
            Xs.append((t.reshape(P, k, 3)[:, 0], x.reshape(P, k, 4)))
        for (t_keep, X_keep), (_, X_kill) in ((Xs[0], Xs[1]), (Xs[1], Xs[0])):
            if cutoff is not None:
                inside = lattice.l1_norm(t_keep) <= cutoff
            else:
                inside = np.ones(P, dtype=bool)
            u, rank = _null_rows(X_kill, 1e-12)
            for p in np.flatnonzero(inside):
                N = u[p][:, rank[p]:].T  # combos annihilating the other output
                if len(N) == 0:
                    continue
                Y = N @ X_keep[p]
                uu, ss, vt = np.linalg.svd(Y, full_matrices=False)
                good = ss > LOCAL_TOL * max(1.0, np.abs(X_keep[p]).max())
                for r in np.flatnonzero(good):
                    combo = (N.T @ uu[:, r]) / ss[r]
                    key = tuple(int(v) for v in t_keep[p])
                    local.append((key, vt[r], combo, ga[p], gb[p], float(ss[r]), int(sel[p])))
    # Deterministic candidate order per output fiber: decreasing magnitude, then pair order.
    by_key: dict = {}
    for item in local:
        by_key.setdefault(item[0], []).append(item)
    keys = sorted(by_key, key=lambda t: (int(np.abs(t).sum()), t))
    keys = [t for t in keys if E.fiber_dim(t) < 4]
    if max_fibers is not None:
        keys = keys[:max_fibers]
    additions = {}
    certified = []
    candidates = 0
    for key in keys:
        base = E.block(key)
        room = 4 - len(base)
        items = sorted(by_key[key], key=lambda it: (-it[5], it[6]))
        rows, exprs = [], []
        for _, vec, combo, ga_p, gb_p, _, _ in items:
            v = vec.copy()
            expr = {}
            for (g1, g2, c) in zip(ga_p, gb_p, combo):
                expr[(int(g1), int(g2))] = expr.get((int(g1), int(g2)), 0.0) + float(c)
            if len(base):
                v = v - base.T @ (base @ v)
            for _ in range(2):
                for w, ew in zip(rows, exprs):
                    h = float(w @ v)
                    v = v - h * w
                    for kk_, cc in ew.items():
                        expr[kk_] = expr.get(kk_, 0.0) - h * cc
            nv = np.linalg.norm(v)
            if nv <= 1e-8:
                continue
            v = v / nv
            expr = {kk_: cc / nv for kk_, cc in expr.items() if abs(cc) > 1e-15 * nv}
            rows.append(v)
            exprs.append(expr)
            if len(rows) == room:
                break
        for v, expr in zip(rows, exprs):
            candidates += 1
            cd = _certify_local(E, gens, key, v, expr, tol, cutoff)
            if cd is not None:
                certified.append(cd)
                additions.setdefault(key, []).append(v)
    E1 = E.extended_blocks(additions)
    info = {"method": "fiber", "candidates": candidates, "local_directions": len(local)}
    return SaturationStep(E, E1, certified, info)


def _certify_local(E, gens, key, v, expr, tol, cutoff):
    """Two-sided certificates for the single-fiber direction ``v`` at ``key``."""
    t = np.array(key, dtype=np.int64)
    fr = fiber_frames(t[None])[0]
    w = SpectralField._trusted(t[None].copy(), fiber_to_coeffs(v, fr)[None])
    # xi = eta - sum alpha B(zeta): a positive weight c on B~(g_a, g_b) is
    # realized by zeta = g_a - g_b (B = -B~), a negative one by g_a + g_b.
    alphas, plus_z, minus_z = [], [], []
    for (a, b), c in sorted(expr.items()):
        if c == 0.0:
            continue
        alphas.append(abs(c))
        s = -1.0 if c > 0 else 1.0
        plus_z.append(gens.combo(a, b, s))
        minus_z.append(gens.combo(a, b, -s))
    if not alphas:
        return None
    plus = SaturationCertificate(w, SpectralField.zero(), alphas, plus_z, cutoff=cutoff)
    from .certificates import certificate_sum

    total = certificate_sum(plus)
    eta = E.project(w + total)
    plus = SaturationCertificate(w, eta, alphas, plus_z, cutoff=cutoff)
    minus = SaturationCertificate(-w, -eta, alphas, minus_z, cutoff=cutoff)
    plus.residual = verify_certificate(plus)
    minus.residual = verify_certificate(minus)
    if plus.residual >= tol or minus.residual >= tol:
        return None
    return CertifiedDirection(w, plus, minus, {"engine": "fiber", "mode": key})


# -- sequences and reports --------------------------------------------------------


def fiber_report(E, radius: int) -> dict:
    """Dimension (0-4) of the projection of ``span(E)`` onto each fiber with ``|m|_1 <= radius``."""
    return E.fiber_dims(radius)


@dataclass
class SaturationReport:
    """Spaces ``E_0, ..., E_N`` with dimensions and per-stage fiber tables."""

    spaces: list
    dims: list
    fiber_map: dict
    radius: int
    steps: list = field(default_factory=list)

    def certificates(self) -> list:
        return [d for s in self.steps for d in s.directions]

    def complete_fibers(self, stage: int) -> list:
        return [m for m, d in self.fiber_map[stage].items() if d == 4]

    def as_dict(self) -> dict:
        fibers = []
        for stage in sorted(self.fiber_map):
            for m, d in sorted(self.fiber_map[stage].items()):
                if d:
                    fibers.append({"m": list(m), "stage": stage, "dimension": int(d)})
        return {
            "schema_version": 1,
            "dims": [int(d) for d in self.dims],
            "radius": int(self.radius),
            "certified": [len(s.directions) for s in self.steps],
            "max_certificate_residual": max(
                [max(d.plus.residual, d.minus.residual) for d in self.certificates()], default=0.0
            ),
            "fibers": fibers,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)


def saturation_sequence(E, N: int, combo_depth: int = 2, tol: float = 1e-9, cutoff: int | None = None, method: str = "auto", max_fibers: int | None = None) -> SaturationReport:
    """Iterate :func:`saturation_step` ``N`` times from ``E``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    spaces = [E]
    steps = []
    for _ in range(N):
        step = saturation_step(spaces[-1], combo_depth, tol, cutoff, method, max_fibers)
        steps.append(step)
        spaces.append(step.E1)
    radius = max(int(lattice.l1_norm(S.modes).max()) if len(S.modes) else 0 for S in spaces)
    fiber_map = {i: S.fiber_dims(radius) for i, S in enumerate(spaces)}
    return SaturationReport(spaces, [S.dim for S in spaces], fiber_map, radius, steps)


def generator_space(radius: int = 3, fiber: bool = True):
    """``span{c_m, s_m : 0 < |m|_1 <= radius}`` over both polarizations."""
    return FiberSubspace.ball(radius) if fiber else ModeSubspace.ball(radius)
