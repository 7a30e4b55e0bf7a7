"""Integer wavevector bookkeeping on the lattice Z^3 minus the origin.

Fields are stored on the canonical half-lattice: a wavevector ``m`` is
canonical when its first nonzero component is positive, so exactly one of
``m`` and ``-m`` is canonical.  Mode sets are ``(K, 3)`` int64 arrays kept
sorted by :func:`keys`, which makes unions and lookups cheap.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_OFFSET = 1 << 17
_WIDTH = 1 << 18

EMPTY_MODES = np.zeros((0, 3), dtype=np.int64)


def as_modes(modes) -> np.ndarray:
    arr = np.asarray(modes, dtype=np.int64)
    if arr.size == 0:
        return EMPTY_MODES.copy()
    arr = arr.reshape(-1, 3)
    if np.any(np.abs(arr) >= _OFFSET):
        raise ValueError("wavevector component out of supported range")
    return arr


def keys(modes) -> np.ndarray:
    """Order-preserving int64 key of each wavevector (lexicographic)."""
    m = as_modes(modes)
    return ((m[:, 0] + _OFFSET) * _WIDTH + (m[:, 1] + _OFFSET)) * _WIDTH + (m[:, 2] + _OFFSET)


def from_keys(k) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64)
    m3 = k % _WIDTH - _OFFSET
    rest = k // _WIDTH
    m2 = rest % _WIDTH - _OFFSET
    m1 = rest // _WIDTH - _OFFSET
    return np.stack([m1, m2, m3], axis=-1).astype(np.int64)


def is_zero(modes) -> np.ndarray:
    return np.all(as_modes(modes) == 0, axis=1)


def is_canonical(modes) -> np.ndarray:
    """True where the first nonzero component is positive."""
    m = as_modes(modes)
    first = np.where(m[:, 0] != 0, m[:, 0], np.where(m[:, 1] != 0, m[:, 1], m[:, 2]))
    return first > 0


def canonicalize(modes) -> tuple[np.ndarray, np.ndarray]:
    """Return canonical representatives and a boolean mask of flipped rows."""
    m = as_modes(modes)
    flip = ~is_canonical(m) & ~is_zero(m)
    out = np.where(flip[:, None], -m, m)
    return out, flip


def l1_norm(modes) -> np.ndarray:
    return np.abs(as_modes(modes)).sum(axis=1)


def l2_norm_sq(modes) -> np.ndarray:
    m = as_modes(modes)
    return (m * m).sum(axis=1)


def linf_norm(modes) -> np.ndarray:
    m = as_modes(modes)
    if len(m) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.abs(m).max(axis=1)


def sort_modes(modes) -> np.ndarray:
    m = as_modes(modes)
    return m[np.argsort(keys(m), kind="stable")]


def unique_modes(modes) -> np.ndarray:
    m = as_modes(modes)
    k, idx = np.unique(keys(m), return_index=True)
    return m[idx]


def union(*mode_sets) -> np.ndarray:
    parts = [as_modes(s) for s in mode_sets if len(as_modes(s))]
    if not parts:
        return EMPTY_MODES.copy()
    return unique_modes(np.concatenate(parts))


def lookup(modes, query) -> np.ndarray:
    """Index of each ``query`` row inside sorted ``modes``; -1 where absent."""
    mk = keys(modes)
    qk = keys(query)
    if len(mk) == 0:
        return np.full(len(qk), -1, dtype=np.int64)
    pos = np.searchsorted(mk, qk)
    pos = np.clip(pos, 0, len(mk) - 1)
    found = mk[pos] == qk
    return np.where(found, pos, -1)


@lru_cache(maxsize=64)
def _ball(radius: int, norm: str) -> np.ndarray:
    r = int(radius)
    rng = np.arange(-r, r + 1)
    grid = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    if norm == "l1":
        size = np.abs(grid).sum(axis=1)
    elif norm == "l2":
        size = np.sqrt((grid * grid).sum(axis=1))
    elif norm == "linf":
        size = np.abs(grid).max(axis=1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    keep = (size <= r) & ~np.all(grid == 0, axis=1) & is_canonical(grid)
    out = sort_modes(grid[keep])
    out.setflags(write=False)
    return out


def ball(radius: int, norm: str = "l1", canonical: bool = True) -> np.ndarray:
    """Nonzero wavevectors with ``|m| <= radius``; canonical half by default.

    ``norm`` is ``"l1"`` (the convention ``|m| = |m1|+|m2|+|m3|`` used for
    mode-set membership), ``"l2"`` or ``"linf"``.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    half = np.array(_ball(int(radius), norm))
    if canonical:
        return half
    return sort_modes(np.concatenate([half, -half]))


def shell(radius: int, norm: str = "l1") -> np.ndarray:
    """Canonical wavevectors with ``|m| == radius``."""
    b = ball(radius, norm)
    if norm == "l1":
        return b[l1_norm(b) == radius]
    if norm == "linf":
        return b[linf_norm(b) == radius]
    return b[np.sqrt(l2_norm_sq(b)) > radius - 1]


def parallel(a, b) -> bool:
    """True when integer vectors ``a`` and ``b`` are parallel (cross product zero)."""
    return not np.any(np.cross(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)))


def enumeration_rank(m) -> int:
    """Rank (starting at 1) of ``m`` in the enumeration of Z^3 minus 0.

    Vectors are ordered by l1 norm, then lexicographically in descending
    order, so ``(1, 0, 0)`` has rank 1.
    """
    m = np.asarray(m, dtype=np.int64).reshape(3)
    if not np.any(m):
        raise ValueError("zero wavevector has no rank")
    r = int(np.abs(m).sum())
    full = ball(r, "l1", canonical=False)
    below = int(np.sum(l1_norm(full) < r))
    same = full[l1_norm(full) == r]
    k = keys(same)
    mk = keys(m[None])[0]
    return below + int(np.sum(k > mk)) + 1
