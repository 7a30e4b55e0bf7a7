"""Pressure recovery, vorticity monitor, continuity probes and export."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..spectral import io as field_io
from ..spectral.fields import ScalarSpectralField, SpectralField
from ..spectral.grid import evaluate_on_grid
from ..spectral.operators import curl, divergence, gradient_product, inverse_laplacian
from .controls import as_signal
from .integrator import GalerkinConfig, Trajectory, galerkin_system, resolve


def pressure_recover(u: SpectralField, h: SpectralField | None = None) -> ScalarSpectralField:
    """Mean-zero pressure ``Delta^{-1}(div h - sum_ij d_j u_i d_i u_j)``.

    ``h`` may be omitted; for a divergence-free ``h`` its term vanishes.
    """
    rhs = -gradient_product(u)
    if h is not None and len(h):
        rhs = rhs + divergence((h.modes, h.coeffs))
    return inverse_laplacian(rhs.prune())


def vorticity_sup(u: SpectralField, grid_res: int = 32, polish: int = 8) -> float:
    """``sup_x |rot u(x)|`` estimated on a grid and refined locally.

    The grid maximum is followed by a local maximization of the exact
    trigonometric polynomial started from the ``polish`` best grid points,
    which makes the value insensitive to the grid resolution.
    """
    if len(u) == 0:
        return 0.0
    w = curl(u)
    if len(w) == 0:
        return 0.0
    vals = np.linalg.norm(evaluate_on_grid(w, grid_res), axis=-1)
    best = float(vals.max())
    if polish <= 0:
        return best
    flat = np.argsort(vals.ravel())[::-1][:polish]
    h = 2 * np.pi / grid_res
    starts = np.stack(np.unravel_index(flat, vals.shape), axis=1) * h
    modes = w.modes.astype(float)
    coeffs = w.coeffs

    def neg_sq(x):
        ph = np.exp(1j * (modes @ x))
        val = 2.0 * np.real(ph @ coeffs)
        dval = 2.0 * np.real((1j * modes * ph[:, None]).T @ coeffs)  # d val_i / d x_j as [j, i]
        return -(val @ val), -2.0 * dval @ val

    for x0 in starts:
        res = minimize(neg_sq, x0, jac=True, method="BFGS", options={"gtol": 1e-13, "maxiter": 200})
        best = max(best, float(np.sqrt(max(-res.fun, 0.0))))
    return best


@dataclass
class LipschitzReport:
    scales: list
    ratios: list
    time_ratio: float
    rate_bound: float
    info: dict = field(default_factory=dict)

    def stable(self, factor: float = 2.0) -> bool:
        r = np.asarray(self.ratios, dtype=float)
        if np.all(r == 0):
            return True
        return float(r.max() / r.min()) <= factor

    def as_dict(self) -> dict:
        return {
            "scales": [float(s) for s in self.scales],
            "ratios": [float(r) for r in self.ratios],
            "time_ratio": float(self.time_ratio),
            "rate_bound": float(self.rate_bound),
        }


def _sup_distance(a: Trajectory, b: Trajectory, k: float) -> float:
    if len(a) != len(b) or not np.allclose(a.times, b.times):
        raise ValueError("trajectories must share their time grid")
    w = galerkin_system(a.config.cutoff)._msq ** k
    d = a.coeffs - b.coeffs
    return float(np.sqrt(2.0 * np.einsum("k,tkj->t", w, np.abs(d) ** 2)).max())


def lipschitz_probe(u0, du0, zeta, f, cfg: GalerkinConfig, scales=(1e-2, 5e-3, 2.5e-3), T: float = 1.0) -> LipschitzReport:
    """Empirical continuity constants of the resolving operator.

    Returns, for each scale ``s``,
    ``sup_t ||R(u0 + s du0) - R(u0)||_{k-1} / (s ||du0||_{k-1})``, the
    largest time-difference quotient ``||u(t) - u(s)||_{k-1} / |t - s|``
    between consecutive stored states, and the bound
    ``max_t ||P_M (f - B(u + zeta))||_{k-1}`` along the base run.
    """
    k1 = cfg.sobolev_k - 1
    zeta = as_signal(zeta, T)
    f = as_signal(f, T)
    base = resolve(u0, zeta, f, cfg, T=T, record="all")
    sys_ = galerkin_system(cfg.cutoff)
    dn = du0.norm(k1)
    ratios = []
    for s in scales:
        if dn == 0:
            ratios.append(0.0)
            continue
        pert = resolve(u0 + s * du0, zeta, f, cfg, T=T, record="all")
        ratios.append(_sup_distance(pert, base, k1) / (s * dn))
    diffs = np.diff(base.coeffs, axis=0)
    dts = np.diff(base.times)
    w = sys_._msq**k1
    quot = np.sqrt(2.0 * np.einsum("k,tkj->t", w, np.abs(diffs) ** 2)) / dts
    bound = 0.0
    modes = sys_.modes
    for i, t in enumerate(base.times):
        side = "left" if i == len(base.times) - 1 else "right"
        z = zeta.dense(t, modes, side)
        rate = f.dense(t, modes, side) - sys_.B(base.coeffs[i] + z)
        bound = max(bound, sys_.norm(rate, k1))
    return LipschitzReport(list(scales), ratios, float(quot.max()), bound, {"steps": len(base)})


def export_trajectory(traj: Trajectory, out_dir: str, stride: int = 0, grid_res: int = 16, prefix: str = "trajectory") -> str:
    """Write ``<prefix>.csv`` (t, energy, ||u||_k, vorticity sup) and optional snapshots.

    ``stride > 0`` also writes every ``stride``-th state as a field file.
    Returns the CSV path.
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{prefix}.csv")
    k = traj.config.sobolev_k
    energy = traj.norms(0) ** 2
    normk = traj.norms(k)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "energy", f"norm_h{k:g}", "vorticity_sup"])
        for i, t in enumerate(traj.times):
            vs = vorticity_sup(traj.state(i), grid_res, polish=0)
            wr.writerow([repr(float(t)), repr(float(energy[i])), repr(float(normk[i])), repr(vs)])
    if stride > 0:
        for i in range(0, len(traj), stride):
            field_io.save(traj.state(i), os.path.join(out_dir, f"{prefix}_{i:06d}.json"))
    return path
