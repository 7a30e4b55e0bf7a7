"""Subspaces that split along mode fibers, and batched pair images of B.

The fiber of a canonical wavevector ``r`` is the 4-dimensional real space of
divergence-free fields supported on ``{r, -r}``.  With the canonical frame
``(l_plus, l_minus)`` a coefficient ``c = alpha l_plus + beta l_minus`` has
fiber coordinates ``sqrt(2) [Re alpha, Im alpha, Re beta, Im beta]``, whose
Euclidean dot product is the L2 inner product.

A field supported on a single fiber has ``B(g) = 0``.  Consequently, for two
such generators ``B(g + h) = -B(g - h) = B~(g, h)``, which is why spans of
single-fiber generators can be handled fiber by fiber.
"""

from __future__ import annotations

import numpy as np

from ..spectral import lattice
from ..spectral.fields import SpectralField
from ..spectral.frames import frame_vectors

SQRT2 = np.sqrt(2.0)


def fiber_frames(modes) -> np.ndarray:
    """``(K, 2, 3)`` frames ``[l_plus, l_minus]`` of canonical ``modes``."""
    lp, lm = frame_vectors(modes)
    return np.stack([lp, lm], axis=1)


def coeffs_to_fiber(coeffs: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """``(..., 3)`` complex coefficients to ``(..., 4)`` fiber coordinates."""
    ab = np.einsum("...j,...pj->...p", coeffs, frames)
    return SQRT2 * np.stack([ab[..., 0].real, ab[..., 0].imag, ab[..., 1].real, ab[..., 1].imag], axis=-1)


def fiber_to_coeffs(x: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Inverse of :func:`coeffs_to_fiber`."""
    alpha = (x[..., 0] + 1j * x[..., 1]) / SQRT2
    beta = (x[..., 2] + 1j * x[..., 3]) / SQRT2
    return alpha[..., None] * frames[..., 0, :] + beta[..., None] * frames[..., 1, :]


class FiberSubspace:
    """Direct sum of subspaces of individual mode fibers.

    Parameters
    ----------
    modes : (K, 3) sorted canonical wavevectors
    blocks : list of ``(d_r, 4)`` arrays with orthonormal rows (fiber coordinates)

    The basis is the concatenation of the block rows, each turned into a
    single-fiber field, in mode order.
    """

    kind = "vector"

    def __init__(self, modes, blocks):
        modes = lattice.as_modes(modes)
        order = np.argsort(lattice.keys(modes), kind="stable")
        modes = modes[order]
        blocks = [np.asarray(blocks[i], dtype=float).reshape(-1, 4) for i in order]
        keep = [i for i, b in enumerate(blocks) if len(b)]
        self.modes = np.array(modes[keep]).reshape(-1, 3)
        self.blocks = [blocks[i] for i in keep]
        for b in self.blocks:
            if len(b) > 4:
                raise ValueError("a fiber has dimension at most 4")
            g = b @ b.T
            if np.abs(g - np.eye(len(b))).max() > 1e-10:
                raise ValueError("fiber blocks must have orthonormal rows")
        self.frames = fiber_frames(self.modes)
        self._offsets = np.concatenate([[0], np.cumsum([len(b) for b in self.blocks])]).astype(int)
        self.orthonormalized = True

    # -- constructors -----------------------------------------------------------

    @classmethod
    def from_modes(cls, modes) -> "FiberSubspace":
        """Full fibers at each canonical mode in ``modes``."""
        modes = lattice.sort_modes(modes)
        return cls(modes, [np.eye(4) for _ in range(len(modes))])

    @classmethod
    def ball(cls, radius: int) -> "FiberSubspace":
        return cls.from_modes(lattice.ball(radius))

    @classmethod
    def from_fields(cls, fields) -> "FiberSubspace":
        """Span of single-fiber fields.

        Raises
        ------
        ValueError
            If some field is supported on more than one fiber.
        """
        by_mode: dict = {}
        for f in fields:
            if len(f) == 0:
                continue
            if len(f) != 1:
                raise ValueError("every generator must be supported on a single fiber")
            key = tuple(int(v) for v in f.modes[0])
            by_mode.setdefault(key, []).append(f.coeffs[0])
        modes = np.array(sorted(by_mode), dtype=np.int64).reshape(-1, 3)
        modes = lattice.sort_modes(modes)
        frames = fiber_frames(modes)
        blocks = []
        for m, fr in zip(modes, frames):
            X = coeffs_to_fiber(np.array(by_mode[tuple(int(v) for v in m)]), fr[None])
            blocks.append(_orthonormal(X))
        return cls(modes, blocks)

    @classmethod
    def from_subspace(cls, S, tol: float = 1e-10) -> "FiberSubspace":
        """Split a dense subspace along fibers.

        Raises
        ------
        ValueError
            If the span is not the direct sum of its fiber intersections.
        """
        if isinstance(S, FiberSubspace):
            return S
        Q = S.matrix
        K = len(S.modes)
        frames = fiber_frames(S.modes)
        C = (Q.reshape(S.dim, 2, K, 3) / SQRT2)
        C = C[:, 0] + 1j * C[:, 1]  # (dim, K, 3)
        X = coeffs_to_fiber(C, frames[None])  # (dim, K, 4)
        blocks = []
        total = 0
        for i in range(K):
            blk = _orthonormal(X[:, i, :], tol)
            blocks.append(blk)
            total += len(blk)
        if total != S.dim:
            raise ValueError("subspace does not split along fibers")
        return cls(S.modes, blocks)

    # -- interface shared with ModeSubspace -------------------------------------

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"FiberSubspace(dim={self.dim}, fibers={len(self.modes)})"

    def index(self, m) -> int:
        c, _ = lattice.canonicalize(np.asarray(m, dtype=np.int64).reshape(1, 3))
        return int(lattice.lookup(self.modes, c)[0])

    def block(self, m) -> np.ndarray:
        i = self.index(m)
        return np.zeros((0, 4)) if i < 0 else self.blocks[i]

    @property
    def basis(self) -> list:
        out = []
        for m, fr, blk in zip(self.modes, self.frames, self.blocks):
            for row in blk:
                out.append(SpectralField._trusted(m[None].copy(), fiber_to_coeffs(row, fr)[None]))
        return out

    @property
    def generators(self) -> list:
        return self.basis

    def fiber_coords(self, u: SpectralField):
        """Fiber coordinates of ``u`` on :attr:`modes` (components elsewhere dropped)."""
        d = u.dense(self.modes, strict=False)
        return coeffs_to_fiber(d, self.frames)

    def coords(self, u: SpectralField) -> np.ndarray:
        x = self.fiber_coords(u)
        return np.concatenate([blk @ x[i] for i, blk in enumerate(self.blocks)]) if self.blocks else np.zeros(0)

    def combine(self, c) -> SpectralField:
        c = np.asarray(c, dtype=float)
        x = np.zeros((len(self.modes), 4))
        for i, blk in enumerate(self.blocks):
            x[i] = c[self._offsets[i]:self._offsets[i + 1]] @ blk
        return SpectralField.from_dense(self.modes, fiber_to_coeffs(x, self.frames), prune=False)

    def project(self, u: SpectralField) -> SpectralField:
        if u.kind != "vector":
            raise ValueError("field kind does not match the subspace")
        return self.combine(self.coords(u))

    def residual(self, u) -> float:
        return (u - self.project(u)).norm(0)

    def contains(self, u, tol: float = 1e-10) -> bool:
        return self.residual(u) <= tol * max(u.norm(0), 1.0)

    def contains_subspace(self, other, tol: float = 1e-10) -> bool:
        if isinstance(other, FiberSubspace):
            for m, blk in zip(other.modes, other.blocks):
                mine = self.block(m)
                r = blk - (blk @ mine.T) @ mine
                if np.abs(r).max(initial=0.0) > tol:
                    return False
            return True
        return all(self.residual(b) <= tol for b in other.basis)

    def fiber_dim(self, m) -> int:
        return len(self.block(m))

    def fiber_dims(self, radius: int) -> dict:
        out = {}
        for m in lattice.ball(radius):
            out[tuple(int(v) for v in m)] = self.fiber_dim(m)
        return out

    def full_modes(self) -> np.ndarray:
        return np.array([m for m, b in zip(self.modes, self.blocks) if len(b) == 4], dtype=np.int64).reshape(-1, 3)

    def max_l1(self) -> int:
        return int(lattice.l1_norm(self.modes).max()) if len(self.modes) else 0

    def complement_projector(self, modes) -> np.ndarray:
        """``(K, 4, 4)`` projectors onto the orthogonal complement of each fiber block."""
        modes = lattice.as_modes(modes)
        idx = lattice.lookup(self.modes, modes) if len(self.modes) else np.full(len(modes), -1)
        out = np.repeat(np.eye(4)[None], len(modes), axis=0)
        for k, i in enumerate(idx):
            if i >= 0:
                b = self.blocks[i]
                out[k] -= b.T @ b
        return out

    def extended_blocks(self, additions: dict) -> "FiberSubspace":
        """New subspace with rows ``additions[mode] (d, 4)`` appended to the fibers."""
        table = {tuple(int(v) for v in m): b for m, b in zip(self.modes, self.blocks)}
        for key, rows in additions.items():
            rows = np.asarray(rows, dtype=float).reshape(-1, 4)
            if len(rows) == 0:
                continue
            old = table.get(key, np.zeros((0, 4)))
            table[key] = _orthonormal(np.vstack([old, rows]))
        keys = sorted(table)
        modes = np.array(keys, dtype=np.int64).reshape(-1, 3)
        return FiberSubspace(modes, [table[k] for k in keys])

    @property
    def matrix(self) -> np.ndarray:
        """Dense real-coordinate basis matrix (for small subspaces only)."""
        K = len(self.modes)
        rows = []
        for f in self.basis:
            rows.append(f.to_real(self.modes))
        return np.array(rows).reshape(self.dim, 6 * K)

    def to_dense(self):
        from ..spectral.subspace import ModeSubspace

        return ModeSubspace.from_matrix(self.modes, self.matrix, kind="vector", generators=self.basis)


def _orthonormal(X, tol: float = 1e-10) -> np.ndarray:
    """Gram-Schmidt on the rows of ``X`` (in order), dropping dependent rows."""
    X = np.asarray(X, dtype=float).reshape(-1, 4)
    if len(X) == 0:
        return np.zeros((0, 4))
    scale = max(float(np.linalg.norm(X, axis=1).max()), 1.0)
    rows = []
    for x in X:
        v = x.copy()
        for _ in range(2):
            for r in rows:
                v -= (r @ v) * r
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            rows.append(v / nv)
        if len(rows) == 4:
            break
    return np.array(rows).reshape(-1, 4)


def pair_images(a: np.ndarray, m: np.ndarray, b: np.ndarray, n: np.ndarray):
    """Batched ``B~(g, h)`` for single-fiber fields ``g = a e^{imx} + c.c.``, ``h = b e^{inx} + c.c.``.

    ``a, b`` are ``(P, 3)`` complex coefficients on canonical ``m, n`` (``(P, 3)``
    integer arrays, ``m != n``).  Returns ``(t_plus, c_plus, t_minus, c_minus)``:
    the canonical output wavevectors ``m + n`` and ``m - n`` (canonicalized) and
    the Leray-projected coefficients there.
    """
    mf = m.astype(float)
    nf = n.astype(float)
    an = np.einsum("pj,pj->p", a, nf)
    bm = np.einsum("pj,pj->p", b, mf)
    bbar = np.conj(b)
    bbm = np.einsum("pj,pj->p", bbar, mf)
    cp = 1j * (an[:, None] * b + bm[:, None] * a)
    cm = 1j * (-an[:, None] * bbar + bbm[:, None] * a)
    tp = m + n
    tm = m - n
    tp, fp = lattice.canonicalize(tp)
    tm, fm = lattice.canonicalize(tm)
    cp = np.where(fp[:, None], np.conj(cp), cp)
    cm = np.where(fm[:, None], np.conj(cm), cm)
    cp = _leray_rows(cp, tp)
    cm = _leray_rows(cm, tm)
    return tp, cp, tm, cm


def _leray_rows(c, t):
    tf = t.astype(float)
    tsq = (tf * tf).sum(axis=1)
    safe = np.where(tsq > 0, tsq, 1.0)
    return c - tf * (np.einsum("pj,pj->p", tf, c) / safe)[:, None]
