"""Finite-dimensional subspaces of spectral fields.

A :class:`ModeSubspace` works in real coordinates on a sorted mode set: the
coordinates of a field are ``sqrt(2) [Re c, Im c]`` flattened, so the
Euclidean dot product of coordinate vectors is the L2 inner product.
"""

from __future__ import annotations

import numpy as np

from . import lattice
from .fields import ScalarSpectralField, SpectralField, mode_basis

RANK_TOL = 1e-10


class ModeSubspace:
    """Span of an ordered list of fields, stored with an orthonormal basis.

    Parameters
    ----------
    basis : list of fields
        Generators, all of the same kind.  They are kept verbatim in
        :attr:`generators`.
    orthonormalize : bool
        If True (default) :attr:`basis` is an orthonormal basis of the span
        obtained by Gram-Schmidt (QR); otherwise the generators are used as
        the basis and projections solve the normal equations.
    modes : array, optional
        Ambient mode set; defaults to the union of generator supports.

    Raises
    ------
    ValueError
        If the generators are linearly dependent (Gram rank < length).
    """

    def __init__(self, basis, orthonormalize: bool = True, modes=None, kind: str | None = None):
        basis = list(basis)
        if kind is None:
            kind = basis[0].kind if basis else "vector"
        if any(b.kind != kind for b in basis):
            raise ValueError("all basis fields must have the same kind")
        self.kind = kind
        self._cls = SpectralField if kind == "vector" else ScalarSpectralField
        if modes is None:
            modes = lattice.union(*[b.modes for b in basis]) if basis else lattice.EMPTY_MODES.copy()
        self.modes = lattice.sort_modes(modes)
        self.generators = basis
        X = np.array([b.to_real(self.modes) for b in basis]).reshape(len(basis), -1)
        self.orthonormalized = orthonormalize
        if orthonormalize:
            Q = _orthonormal_rows(X)
            if len(Q) < len(basis):
                raise ValueError(f"rank-deficient basis: rank {len(Q)} < {len(basis)}")
            self._Q = Q
            self._gram_inv = None
        else:
            G = X @ X.T
            if len(basis) and np.linalg.matrix_rank(G, tol=RANK_TOL * max(np.abs(G).max(), 1e-300)) < len(basis):
                raise ValueError("rank-deficient basis")
            self._Q = X
            self._gram_inv = np.linalg.inv(G) if len(basis) else np.zeros((0, 0))
        self._Q.setflags(write=False)

    # -- constructors ----------------------------------------------------------

    @classmethod
    def from_modes(cls, modes, modes_ambient=None) -> "ModeSubspace":
        """Span of ``{c_m, s_m}`` over both polarizations for each mode in ``modes``."""
        modes = lattice.sort_modes(modes)
        return cls(mode_basis(modes), modes=modes if modes_ambient is None else modes_ambient)

    @classmethod
    def ball(cls, radius: int) -> "ModeSubspace":
        """Full span of all modes with ``0 < |m|_1 <= radius``."""
        return cls.from_modes(lattice.ball(radius))

    @classmethod
    def from_matrix(cls, modes, Q, kind="vector", generators=None) -> "ModeSubspace":
        """Wrap an orthonormal coordinate matrix without recomputation."""
        obj = cls.__new__(cls)
        obj.kind = kind
        obj._cls = SpectralField if kind == "vector" else ScalarSpectralField
        obj.modes = lattice.sort_modes(modes)
        Q = np.array(Q, dtype=float)
        obj._Q = Q
        obj._Q.setflags(write=False)
        obj._gram_inv = None
        obj.orthonormalized = True
        obj.generators = generators if generators is not None else [
            obj._cls.from_real(obj.modes, row) for row in Q
        ]
        return obj

    # -- basic properties -------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self._Q)

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"ModeSubspace(kind={self.kind!r}, dim={self.dim}, modes={len(self.modes)})"

    @property
    def matrix(self) -> np.ndarray:
        """Basis coordinate matrix, one row per basis vector."""
        return self._Q

    @property
    def basis(self) -> list:
        return [self._cls.from_real(self.modes, row) for row in self._Q]

    def gram(self) -> np.ndarray:
        return self._Q @ self._Q.T

    # -- coordinates ------------------------------------------------------------

    def real_coords(self, u) -> np.ndarray:
        """Ambient real coordinates of ``u``; components outside :attr:`modes` are dropped."""
        return _loose_real(u, self.modes)

    def coords(self, u) -> np.ndarray:
        """Coefficients of ``P u`` in :attr:`basis`."""
        x = _loose_real(u, self.modes)
        y = self._Q @ x
        if self._gram_inv is not None:
            y = self._gram_inv @ y
        return y

    def combine(self, c) -> SpectralField:
        """Field ``sum_i c_i basis_i``."""
        c = np.asarray(c, dtype=float)
        return self._cls.from_real(self.modes, c @ self._Q)

    def project(self, u):
        """L2-orthogonal projection onto the span."""
        if u.kind != self.kind:
            raise ValueError("field kind does not match the subspace")
        return self.combine(self.coords(u))

    def residual(self, u) -> float:
        """``||u - P u||_0``."""
        return (u - self.project(u)).norm(0)

    def contains(self, u, tol: float = 1e-10) -> bool:
        scale = max(u.norm(0), 1.0)
        return self.residual(u) <= tol * scale

    def contains_subspace(self, other: "ModeSubspace", tol: float = 1e-10) -> bool:
        return all(self.residual(b) <= tol for b in other.basis)

    # -- growth -----------------------------------------------------------------

    def extended(self, fields, tol: float = RANK_TOL) -> tuple["ModeSubspace", int]:
        """Span of this subspace plus ``fields``; returns ``(subspace, added_dim)``.

        Fresh directions below ``tol`` (relative) after projection are ignored.
        """
        fields = list(fields)
        modes = lattice.union(self.modes, *[f.modes for f in fields]) if fields else self.modes
        base = _reembed(self._Q, self.modes, modes) if self.orthonormalized else _orthonormal_rows(
            _reembed(self._Q, self.modes, modes)
        )
        current = base
        added = []
        for f in fields:
            x = _loose_real(f, modes)
            nx = np.linalg.norm(x)
            if nx == 0:
                continue
            for _ in range(2):
                x = x - current.T @ (current @ x)
            if np.linalg.norm(x) > tol * nx:
                x = x / np.linalg.norm(x)
                added.append(x)
                current = np.vstack([current, x[None]])
        sub = ModeSubspace.from_matrix(modes, current, kind=self.kind)
        return sub, len(added)

    def fiber_dims(self, radius: int) -> dict:
        """Dimension of the projection of the span onto each mode fiber.

        For each canonical ``m`` with ``|m|_1 <= radius`` this is the rank
        of the block of basis coordinates living on ``m``.
        """
        out = {}
        for m in lattice.ball(radius):
            out[tuple(int(v) for v in m)] = self.fiber_dim(m)
        return out

    def fiber_dim(self, m) -> int:
        m = np.asarray(m, dtype=np.int64).reshape(1, 3)
        c, _ = lattice.canonicalize(m)
        idx = lattice.lookup(self.modes, c)[0]
        if idx < 0 or self.dim == 0:
            return 0
        block = self._fiber_block(idx)
        s = np.linalg.svd(block, compute_uv=False)
        return int(np.sum(s > 1e-9 * max(1.0, s.max() if len(s) else 0.0)))

    def _fiber_block(self, idx):
        K = len(self.modes)
        t = 3 if self.kind == "vector" else 1
        Q = self._Q.reshape(self.dim, 2, K, t)
        return Q[:, :, idx, :].reshape(self.dim, 2 * t)


def _loose_real(u, modes) -> np.ndarray:
    d = u.dense(modes, strict=False)
    return np.sqrt(2.0) * np.concatenate([d.real.ravel(), d.imag.ravel()])


def _reembed(Q, old_modes, new_modes):
    if len(old_modes) == len(new_modes) and np.array_equal(old_modes, new_modes):
        return np.array(Q)
    d = len(Q)
    K_old, K_new = len(old_modes), len(new_modes)
    t = Q.shape[1] // (2 * K_old) if K_old else 3
    out = np.zeros((d, 2, K_new, t))
    if d and K_old:
        idx = lattice.lookup(new_modes, old_modes)
        out[:, :, idx, :] = Q.reshape(d, 2, K_old, t)
    return out.reshape(d, 2 * K_new * t)


def _orthonormal_rows(X, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning the row space of ``X``, in generator order."""
    if len(X) == 0:
        return np.zeros((0, X.shape[1] if X.ndim == 2 else 0))
    scale = np.linalg.norm(X, axis=1).max()
    if scale == 0:
        return np.zeros((0, X.shape[1]))
    q, r = np.linalg.qr(X.T)
    diag = np.abs(np.diag(r))
    if np.all(diag > tol * scale):
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return (q * signs).T
    # Rank-deficient: fall back to sequential Gram-Schmidt.
    rows = []
    for x in X:
        v = x.astype(float)
        for _ in range(2):
            for r_ in rows:
                v = v - (r_ @ v) * r_
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            rows.append(v / nv)
    return np.array(rows).reshape(len(rows), X.shape[1])
