"""Exact convolution of finite trigonometric polynomials on canonical storage.

A product of two real fields ``a`` and ``b`` has coefficients

    c(r) = sum_{p + q = r} K(A(p), B(q), p, q)

over the full lattice, where ``A(-c) = conj(a(c))``.  A plan enumerates once
every (p, q) pair, over all four sign choices of the two canonical supports,
that lands on a wanted canonical output ``r``; evaluating a bilinear kernel is
then a gather, a multiply and a scatter-add.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import lattice

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

_PLAN_CACHE: OrderedDict = OrderedDict()
_PLAN_CACHE_SIZE = 128


class ConvolutionPlan:
    """Index tables for products of fields supported on ``a_modes`` x ``b_modes``.

    Parameters
    ----------
    a_modes, b_modes : (K, 3) int arrays
        Sorted canonical supports of the two factors.
    out_modes : (R, 3) int array, optional
        Sorted canonical output set.  Pairs landing elsewhere are discarded,
        which is how Galerkin truncation of a product is expressed.  When
        omitted the full product support is used.

    Attributes
    ----------
    out_modes : (R, 3) int array
    zero_pairs : index tables of the pairs landing on ``r = 0``
    """

    def __init__(self, a_modes, b_modes, out_modes=None):
        a_modes = lattice.as_modes(a_modes)
        b_modes = lattice.as_modes(b_modes)
        self.a_modes = a_modes
        self.b_modes = b_modes
        na, nb = len(a_modes), len(b_modes)
        ia, ib = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
        cols = {k: [] for k in ("ia", "sa", "ib", "sb", "r")}
        zero = {k: [] for k in ("ia", "sa", "ib", "sb")}
        for sa in (1, -1):
            for sb in (1, -1):
                p = sa * a_modes[ia]
                q = sb * b_modes[ib]
                r = p + q
                z = lattice.is_zero(r)
                if np.any(z):
                    for name, val in (("ia", ia[z]), ("ib", ib[z])):
                        zero[name].append(val)
                    zero["sa"].append(np.full(z.sum(), sa))
                    zero["sb"].append(np.full(z.sum(), sb))
                keep = lattice.is_canonical(r) & ~z
                cols["ia"].append(ia[keep])
                cols["ib"].append(ib[keep])
                cols["sa"].append(np.full(keep.sum(), sa))
                cols["sb"].append(np.full(keep.sum(), sb))
                cols["r"].append(r[keep])
        cat = {k: (np.concatenate(v) if v else np.zeros(0, dtype=np.int64)) for k, v in cols.items()}
        r = cat["r"].reshape(-1, 3)
        if out_modes is None:
            out_modes = lattice.unique_modes(r) if len(r) else lattice.EMPTY_MODES.copy()
        out_modes = lattice.as_modes(out_modes)
        ir = lattice.lookup(out_modes, r) if len(r) else np.zeros(0, dtype=np.int64)
        hit = ir >= 0
        self.out_modes = out_modes
        self.ia = cat["ia"][hit]
        self.ib = cat["ib"][hit]
        self.sa = cat["sa"][hit]
        self.sb = cat["sb"][hit]
        self.ir = ir[hit]
        self.p = (self.sa[:, None] * a_modes[self.ia]).astype(float) if len(self.ia) else np.zeros((0, 3))
        self.q = (self.sb[:, None] * b_modes[self.ib]).astype(float) if len(self.ib) else np.zeros((0, 3))
        zc = {k: (np.concatenate(v) if v else np.zeros(0, dtype=np.int64)) for k, v in zero.items()}
        self.z_ia, self.z_ib, self.z_sa, self.z_sb = zc["ia"], zc["ib"], zc["sa"], zc["sb"]
        self.z_p = (self.z_sa[:, None] * a_modes[self.z_ia]).astype(float) if len(self.z_ia) else np.zeros((0, 3))
        self.z_q = -self.z_p
        self._z_ir = np.zeros(len(self.z_ia), dtype=np.int64)
        for name in ("ia", "ib", "sa", "sb", "ir", "z_ia", "z_ib", "z_sa", "z_sb"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.int64))
        self.q = np.ascontiguousarray(self.q, dtype=float)
        self.z_q = np.ascontiguousarray(self.z_q, dtype=float)

    def __len__(self):
        return len(self.ir)

    @staticmethod
    def _gather(c, idx, sign):
        g = c[idx]
        neg = sign < 0
        if np.any(neg):
            g = g.copy()
            g[neg] = np.conj(g[neg])
        return g

    def _scatter(self, terms):
        n = len(self.out_modes)
        if terms.ndim == 1:
            return np.bincount(self.ir, terms.real, n) + 1j * np.bincount(self.ir, terms.imag, n)
        out = np.empty((n,) + terms.shape[1:], dtype=complex)
        for j in range(terms.shape[1]):
            out[:, j] = np.bincount(self.ir, terms[:, j].real, n) + 1j * np.bincount(
                self.ir, terms[:, j].imag, n
            )
        return out

    def advect(self, a, b):
        """Coefficients of ``(a . grad) b`` before projection.

        Returns ``(out, zero)``: the coefficients on ``out_modes`` and the
        (vector) coefficient at ``r = 0``.
        """
        if _advect_kernel is None:
            return self.advect_numpy(a, b)
        a = np.ascontiguousarray(a, dtype=complex)
        b = np.ascontiguousarray(b, dtype=complex)
        out = _advect_kernel(a, b, self.ia, self.sa, self.ib, self.sb, self.q, self.ir, len(self.out_modes))
        if len(self.z_ia):
            zero = _advect_kernel(a, b, self.z_ia, self.z_sa, self.z_ib, self.z_sb, self.z_q, self._z_ir, 1)[0]
        else:
            zero = np.zeros(3, dtype=complex)
        return out, zero

    def advect_numpy(self, a, b):
        """Vectorized reference evaluation of :meth:`advect`."""
        A = self._gather(a, self.ia, self.sa)
        B = self._gather(b, self.ib, self.sb)
        terms = 1j * np.einsum("kj,kj->k", A, self.q)[:, None] * B
        out = self._scatter(terms)
        if len(self.z_ia):
            Az = self._gather(a, self.z_ia, self.z_sa)
            Bz = self._gather(b, self.z_ib, self.z_sb)
            zero = (1j * np.einsum("kj,kj->k", Az, self.z_q)[:, None] * Bz).sum(axis=0)
        else:
            zero = np.zeros(3, dtype=complex)
        return out, zero

    def gradient_product(self, a, b):
        """Coefficients of ``sum_ij d_j a_i d_i b_j``; returns ``(out, zero)``."""
        A = self._gather(a, self.ia, self.sa)
        B = self._gather(b, self.ib, self.sb)
        terms = -np.einsum("kj,kj->k", A, self.q) * np.einsum("kj,kj->k", B, self.p)
        out = self._scatter(terms)
        if len(self.z_ia):
            Az = self._gather(a, self.z_ia, self.z_sa)
            Bz = self._gather(b, self.z_ib, self.z_sb)
            zero = complex(-np.sum(np.einsum("kj,kj->k", Az, self.z_q) * np.einsum("kj,kj->k", Bz, self.z_p)))
        else:
            zero = 0j
        return out, zero

    def product(self, a, b):
        """Coefficients of the pointwise product of two scalar fields."""
        A = self._gather(a, self.ia, self.sa)
        B = self._gather(b, self.ib, self.sb)
        out = self._scatter(A * B)
        if len(self.z_ia):
            zero = complex(np.sum(self._gather(a, self.z_ia, self.z_sa) * self._gather(b, self.z_ib, self.z_sb)))
        else:
            zero = 0j
        return out, zero


def _make_advect_kernel():
    if njit is None:
        return None

    @njit(cache=True)
    def kernel(a, b, ia, sa, ib, sb, q, ir, nout):
        out = np.zeros((nout, 3), dtype=np.complex128)
        for k in range(ir.shape[0]):
            i = ia[k]
            j = ib[k]
            a0, a1, a2 = a[i, 0], a[i, 1], a[i, 2]
            if sa[k] < 0:
                a0, a1, a2 = a0.conjugate(), a1.conjugate(), a2.conjugate()
            f = 1j * (a0 * q[k, 0] + a1 * q[k, 1] + a2 * q[k, 2])
            b0, b1, b2 = b[j, 0], b[j, 1], b[j, 2]
            if sb[k] < 0:
                b0, b1, b2 = b0.conjugate(), b1.conjugate(), b2.conjugate()
            r = ir[k]
            out[r, 0] += f * b0
            out[r, 1] += f * b1
            out[r, 2] += f * b2
        return out

    return kernel


_advect_kernel = _make_advect_kernel()


def get_plan(a_modes, b_modes, out_modes=None) -> ConvolutionPlan:
    """Cached :class:`ConvolutionPlan` keyed by the three mode sets."""
    a_modes = lattice.as_modes(a_modes)
    b_modes = lattice.as_modes(b_modes)
    key = (
        a_modes.tobytes(),
        b_modes.tobytes(),
        None if out_modes is None else lattice.as_modes(out_modes).tobytes(),
    )
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        _PLAN_CACHE.move_to_end(key)
        return plan
    plan = ConvolutionPlan(a_modes, b_modes, out_modes)
    _PLAN_CACHE[key] = plan
    if len(_PLAN_CACHE) > _PLAN_CACHE_SIZE:
        _PLAN_CACHE.popitem(last=False)
    return plan
