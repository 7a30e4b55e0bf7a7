"""The low-mode pressure form ``A``, lift wavevectors and the pressure lift."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..spectral import lattice
from ..spectral.fields import ScalarSpectralField, SpectralField, trig_mode
from ..spectral.frames import canonical_frame, polarization, rotated
from ..spectral.operators import gradient_product, inverse_laplacian

STRATEGIES = ("paper_formula", "minimal_norm")
DEGENERATE_TOL = 1e-9


def quadratic_form_A(u: SpectralField, v: SpectralField | None = None, m: int = 1) -> ScalarSpectralField:
    """``A(u, v) = -P_{G_m} Delta^{-1} sum_ij d_j u_i d_i v_j``.

    ``G_m`` is spanned by ``sin<n,x>, cos<n,x>`` with ``0 < |n|_1 <= m``;
    ``A(u) = A(u, u)``.  The product is evaluated exactly on the
    wavevectors of ``G_m`` only.
    """
    if v is None:
        v = u
    if m < 1:
        raise ValueError("m must be a positive integer")
    g = gradient_product(u, v, out_modes=lattice.ball(m))
    return (-1.0) * inverse_laplacian(g) if len(g) else g


def _l1(k) -> int:
    return int(np.abs(np.asarray(k)).sum())


def phi_rank(n) -> int:
    """The fixed injection ``Z^3_* -> N_*``: rank by l1 norm, then lexicographic."""
    return lattice.enumeration_rank(n)


def m_vector(n, m: int) -> np.ndarray:
    """``(m, 0, 0)`` unless ``n`` is parallel to it, else ``(0, m, 0)``."""
    a = np.array([m, 0, 0], dtype=np.int64)
    return a if not lattice.parallel(n, a) else np.array([0, m, 0], dtype=np.int64)


@dataclass(frozen=True)
class WaveQuadruple:
    """Lift wavevectors ``k1 .. k4`` for the target wavevector ``n``."""

    n: tuple
    k1: tuple
    k2: tuple
    k3: tuple
    k4: tuple
    phi_n: int
    m_of_n: tuple
    strategy: str = "paper_formula"

    @property
    def ks(self) -> list:
        return [np.array(k, dtype=np.int64) for k in (self.k1, self.k2, self.k3, self.k4)]

    def l1_norm(self) -> int:
        return sum(_l1(k) for k in self.ks)

    def max_l1(self) -> int:
        return max(_l1(k) for k in self.ks)

    def b_margin(self) -> int:
        """Smallest l1 norm over the combination set checked by the validator (this block alone)."""
        return _block_margin([self])


def _make(n, ks, strategy, m) -> WaveQuadruple:
    t = lambda k: tuple(int(x) for x in k)  # noqa: E731
    return WaveQuadruple(t(n), *(t(k) for k in ks), phi_rank(n), t(m_vector(n, m)), strategy)


def _target_modes(m: int) -> list:
    """Canonical ``n`` with ``0 < |n|_1 <= m`` in the order of :func:`phi_rank`."""
    return sorted((tuple(int(x) for x in n) for n in lattice.ball(m)), key=phi_rank)


def _pairs(quads):
    """Every wavevector pair with a flag marking the intended ``(k1, k2)``, ``(k3, k4)`` products."""
    items = []
    for qi, q in enumerate(quads):
        for j, k in enumerate(q.ks):
            items.append((qi, j, k))
    for a in range(len(items)):
        for b in range(a, len(items)):
            qa, ja, ka = items[a]
            qb, jb, kb = items[b]
            intended = qa == qb and {ja, jb} in ({0, 1}, {2, 3})
            yield ka, kb, a == b, intended


def _block_margin(quads) -> int:
    out = None
    for ka, kb, same, intended in _pairs(quads):
        vals = [_l1(ka + kb)]
        if not same and not intended:
            vals.append(_l1(ka - kb))
        v = min(vals)
        out = v if out is None else min(out, v)
    return int(out)


def validate_quadruples(quads, m: int) -> list:
    """Violations of the lift conditions for a whole family (empty list when valid).

    For every quadruple: ``k2 - k1 = k4 - k3 = n``; all ``|k_i|_1 > 2m``;
    ``k1 , k2`` and ``k3 , k4`` not parallel.  Across the family (inclusive
    reading): every sum of two lift wavevectors, and every difference other
    than the intended ``k2 - k1`` and ``k4 - k3`` of one block, has l1 norm
    ``> m``, which includes differences with the wavevectors of the other
    targets.
    """
    quads = list(quads.values()) if isinstance(quads, dict) else list(quads)
    bad = []
    for q in quads:
        n = np.array(q.n, dtype=np.int64)
        k1, k2, k3, k4 = q.ks
        if np.any(k2 - k1 != n) or np.any(k4 - k3 != n):
            bad.append(f"n={q.n}: differences k2-k1, k4-k3 must equal n")
        for i, k in enumerate(q.ks, 1):
            if _l1(k) <= 2 * m:
                bad.append(f"n={q.n}: |k{i}|_1 = {_l1(k)} <= 2m")
        if lattice.parallel(k1, k2):
            bad.append(f"n={q.n}: k1 parallel to k2")
        if lattice.parallel(k3, k4):
            bad.append(f"n={q.n}: k3 parallel to k4")
    for ka, kb, same, intended in _pairs(quads):
        if _l1(ka + kb) <= m:
            bad.append(f"|{tuple(ka)} + {tuple(kb)}|_1 <= m")
        if not same and not intended and _l1(ka - kb) <= m:
            bad.append(f"|{tuple(ka)} - {tuple(kb)}|_1 <= m")
    return bad


def _check(quads, m):
    bad = validate_quadruples(quads, m)
    if bad:
        raise AssertionError("lift wavevectors fail validation: " + "; ".join(bad[:5]))


def _compatible(k, chosen, m) -> bool:
    return all(_l1(k + c) > m and _l1(k - c) > m for c in chosen)


def _candidate_pairs(n, m: int, radius: int) -> list:
    """``(k, k + n)`` with both l1 norms in ``(2m, radius]``, not parallel, by increasing size."""
    full = lattice.ball(radius, "l1", canonical=False)
    full = full[lattice.l1_norm(full) > 2 * m]
    out = []
    for k in full:
        k2 = k + n
        if 2 * m < _l1(k2) <= radius and not lattice.parallel(k, k2):
            out.append((_l1(k) + _l1(k2), tuple(-k), k, k2))
    out.sort(key=lambda x: (x[0], x[1]))
    return [(k, k2) for _, _, k, k2 in out]


def _greedy_family(m: int) -> dict:
    """Smallest-norm pairs chosen block by block in the order of :func:`phi_rank`."""
    chosen, family = [], {}
    for n in _target_modes(m):
        nv = np.array(n, dtype=np.int64)
        radius = 2 * m + 1
        block = None
        while block is None:
            cands = _candidate_pairs(nv, m, radius)
            picked = []
            for k, k2 in cands:
                cur = chosen + [x for pair in picked for x in pair]
                if not (_compatible(k, cur, m) and _compatible(k2, cur, m) and _l1(k + k2) > m and _l1(2 * k) > m):
                    continue
                picked.append((k, k2))
                if len(picked) == 2:
                    break
            if len(picked) == 2:
                block = picked
            else:
                radius += 1
                if radius > 2 * m + 12:
                    raise AssertionError(f"no lift wavevectors found for n={n}")
        (k1, k2), (k3, k4) = block
        family[n] = _make(nv, (k1, k2, k3, k4), "minimal_norm", m)
        chosen.extend([k1, k2, k3, k4])
    return family


def _paper_quadruple(n, m) -> WaveQuadruple:
    nv = np.array(n, dtype=np.int64)
    mv = m_vector(nv, m)
    p = phi_rank(nv)
    k1 = 8 * p * mv
    k3 = (8 * p + 4) * mv
    return _make(nv, (k1, k1 + nv, k3, k3 + nv), "paper_formula", m)


@lru_cache(maxsize=None)
def _family(m: int, strategy: str) -> tuple:
    if strategy == "paper_formula":
        fam = {n: _paper_quadruple(n, m) for n in _target_modes(m)}
    elif strategy == "minimal_norm":
        fam = _greedy_family(m)
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    _check(fam, m)
    return tuple(fam.items())


def lift_family(m: int, strategy: str = "minimal_norm") -> dict:
    """Validated quadruples for every canonical ``n`` with ``|n|_1 <= m``."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return dict(_family(int(m), strategy))


def select_wavevectors(n, m: int, strategy: str = "paper_formula") -> WaveQuadruple:
    """Lift wavevectors for one target ``n`` (drawn from the validated family).

    Raises
    ------
    ValueError
        Unless ``0 < |n|_1 <= m``.
    AssertionError
        If the construction fails validation.
    """
    nv = np.asarray(n, dtype=np.int64).reshape(3)
    if not 0 < _l1(nv) <= m:
        raise ValueError("need 0 < |n|_1 <= m")
    c, flip = lattice.canonicalize(nv[None])
    if flip[0]:
        raise ValueError("n must be canonical (sin<-n,x> = -sin<n,x>)")
    q = lift_family(m, strategy)[tuple(int(x) for x in c[0])]
    _check([q], m)
    return q


@dataclass
class PressureTarget:
    """Velocity target in ``F_m`` and pressure target in ``G_m``."""

    m: int
    u_hat: SpectralField
    p_hat: ScalarSpectralField

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if len(self.u_hat) and self.u_hat.max_l1() > self.m:
            raise ValueError("u_hat must lie in F_m")
        if len(self.p_hat) and self.p_hat.max_l1() > self.m:
            raise ValueError("p_hat must lie in G_m")

    def residual_field(self) -> ScalarSpectralField:
        """``p_hat - A(u_hat)``."""
        return self.p_hat - quadratic_form_A(self.u_hat, m=self.m)

    def coefficients(self) -> dict:
        """``n -> (C_n, D_n)`` with ``p_hat - A(u_hat) = sum C_n sin<n,x> + D_n cos<n,x>``."""
        r = self.residual_field()
        C, D = r.sin_cos()
        out = {n: (0.0, 0.0) for n in _target_modes(self.m)}
        for mode, c, d in zip(r.modes, C, D):
            out[tuple(int(x) for x in mode)] = (float(c), float(d))
        return out


def _frame_vector(k, turn: bool) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64)
    if not turn:
        return polarization(k)
    frame = rotated(canonical_frame(k), np.pi / 4)
    return frame.l_plus if lattice.is_canonical(k[None])[0] else frame.l_minus


def _pair_frames(ka, kb):
    """Polarizations at ``ka, kb`` with ``<l(ka), kb> <l(kb), ka> != 0``, turning frames by 45 degrees if needed."""
    scale = np.linalg.norm(ka) * np.linalg.norm(kb)
    for ta, tb in ((False, False), (True, False), (False, True), (True, True)):
        la, lb = _frame_vector(ka, ta), _frame_vector(kb, tb)
        gain = float((la @ kb) * (lb @ ka))
        if abs(gain) > DEGENERATE_TOL * scale:
            return la, lb, gain, (ta, tb)
    raise AssertionError(f"degenerate frames at {tuple(ka)}, {tuple(kb)}")


@dataclass
class LiftBlock:
    """Coefficients of one target wavevector's lift."""

    quad: WaveQuadruple
    C1: float
    D2: float
    C3: float
    C4: float
    frames: list = field(default_factory=list)
    gains: tuple = (0.0, 0.0)
    rotated: tuple = ()

    def field(self) -> SpectralField:
        k1, k2, k3, k4 = self.quad.ks
        l1, l2, l3, l4 = self.frames
        out = SpectralField.zero()
        for k, kind, l, a in ((k1, "sin", l1, self.C1), (k2, "cos", l2, self.D2), (k3, "sin", l3, self.C3), (k4, "sin", l4, self.C4)):
            if a:
                out = out + trig_mode(k, kind, vector=l, amplitude=a)
        return out


def _split(product: float, rule: str):
    if rule == "fixed":
        return (1.0, product) if product else (0.0, 0.0)
    if rule == "balanced":
        a = float(np.sqrt(abs(product)))
        return a, float(np.copysign(a, product))
    raise ValueError(f"unknown coefficient rule {rule!r}")


def lift_blocks(target: PressureTarget, quadruples: dict, rule: str = "fixed") -> list:
    """Per-``n`` coefficients solving ``A(v) = p_hat - A(u_hat)``.

    With ``kappa_s = <l(k1), k2> <l(k2), k1>`` and
    ``kappa_c = <l(k3), k4> <l(k4), k3>`` the blocks give
    ``A(C1 s_k1 + D2 c_k2) = -C1 D2 kappa_s / |n|^2 sin<n,x>`` and
    ``A(C3 s_k3 + C4 s_k4) = C3 C4 kappa_c / |n|^2 cos<n,x>``.  The
    ``fixed`` rule sets ``C1 = C3 = 1`` and solves linearly for the partner
    (a block with a vanishing target coefficient is left out);
    ``balanced`` splits the product into equal magnitudes.
    """
    _check(quadruples, target.m)
    out = []
    for n, (Cn, Dn) in target.coefficients().items():
        q = quadruples[n]
        k1, k2, k3, k4 = q.ks
        nsq = float(np.dot(q.n, q.n))
        l1, l2, gs, r12 = _pair_frames(k1, k2)
        l3, l4, gc, r34 = _pair_frames(k3, k4)
        C1, D2 = _split(-Cn * nsq / gs, rule)
        C3, C4 = _split(Dn * nsq / gc, rule)
        out.append(LiftBlock(q, C1, D2, C3, C4, [l1, l2, l3, l4], (gs, gc), r12 + r34))
    return out


def pressure_lift(target: PressureTarget, quadruples: dict, rule: str = "fixed") -> SpectralField:
    """Field ``v`` orthogonal to ``F_m`` with ``A(u_hat + v) = p_hat``."""
    v = SpectralField.zero()
    for b in lift_blocks(target, quadruples, rule):
        v = v + b.field()
    return v


def export_quadruples_csv(quadruples: dict, path) -> int:
    """Write ``n, k1 .. k4, phi, m(n), strategy`` rows; returns the row count."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "k1", "k2", "k3", "k4", "phi", "m_of_n", "strategy"])
        for n in sorted(quadruples, key=phi_rank):
            q = quadruples[n]
            fmt = lambda k: " ".join(str(int(x)) for x in k)  # noqa: E731
            w.writerow([fmt(q.n), fmt(q.k1), fmt(q.k2), fmt(q.k3), fmt(q.k4), q.phi_n, fmt(q.m_of_n), q.strategy])
    return len(quadruples)
