"""The synthesis cascade from a target state to an ``E``-valued control."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..saturation.saturate import generator_space, saturation_sequence
from ..sim.controls import ControlSignal, ScaledSignal, SumSignal
from ..sim.integrator import GalerkinConfig, resolve_controlled
from ..spectral import lattice
from ..spectral.fields import SpectralField, random_field
from ..spectral.operators import heat_semigroup
from .ansatz import ansatz_control, reduce_to_subspace
from .convexify import VertexCertifier, convexify, principal_directions
from .eliminate import eliminate_zeta
from .pwc import FieldBasis, pwc_approximate
from .relaxation import build_schedule, compute_relaxation_defect, relaxation_control


@dataclass(frozen=True)
class SynthesisParams:
    """Knobs of :func:`synthesize`.

    Attributes
    ----------
    mu, delta : float
        Smoothing of the target and of the initial state in the ansatz.
    s : int
        Number of equal intervals of the piecewise-constant approximation.
    n : int
        Oscillation periods per interval.
    ramp_fraction : float
        Ramp width as a fraction of the shortest pulse ``T d_min / (s n)``.
    ramp_shape : {"cubic", "cosine"}
    ramp_pieces : int
        RK4 segments per ramp.
    margin : float
        Vertex scale ``margin * M`` with ``M`` the sampled coordinate bound;
        ``margin > 1`` keeps every pulse away from zero length.
    mixing : {"literal", "netted"}
    order : {"paired", "listed"}
    split : bool
        Keep the ``E`` part of each stage control as it is and approximate
        only the complement in its principal subspace.  ``False`` runs the
        approximation on the whole certified span.
    samples_per_interval : int
        Sampling density for the principal subspace.
    budget : float
        Relative error budget in the reporting norm, checked at every stage.
    certificate_terms : tuple of int
        Lengths tried for compact vertex certificates.
    seed : int
        Seed of the certificate search and of the residual probes.
    defect : bool
        Also measure ``sup ||K f_n||`` along the convexified trajectory.
    """

    mu: float = 1e-4
    delta: float = 1e-4
    s: int = 16
    n: int = 32
    ramp_fraction: float = 5e-3
    ramp_shape: str = "cubic"
    ramp_pieces: int = 1
    margin: float = 1.25
    mixing: str = "literal"
    order: str = "paired"
    split: bool = True
    samples_per_interval: int = 4
    oversample: int = 8
    budget: float = 0.1
    certificate_terms: tuple = (2, 3)
    seed: int = 0
    defect: bool = False

    def __post_init__(self):
        if not (self.mu > 0 and self.delta > 0):
            raise ValueError("mu and delta must be positive")
        if self.s < 1 or self.n < 1:
            raise ValueError("s and n must be positive integers")
        if not 0 < self.ramp_fraction < 1:
            raise ValueError("ramp_fraction must lie in (0, 1)")
        if not self.margin >= 1:
            raise ValueError("margin must be at least 1")

    def with_(self, **kw) -> "SynthesisParams":
        return replace(self, **kw)


def _round(x, digits=12):
    """Round floats to ``digits`` significant digits, recursively."""
    if isinstance(x, dict):
        return {str(k): _round(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, digits) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x) or x == 0.0:
            return x
        return float(f"{x:.{digits - 1}e}")
    return x


@dataclass
class SynthesisReport:
    """Errors and bookkeeping of one cascade run.

    ``errors`` holds absolute errors ``||u(T) - u_hat||_k`` keyed by stage
    name; ``relative`` the same divided by ``||u_hat||_k``.  Flags are
    ``True`` when the corresponding relative error is within the budget.
    """

    params: dict
    k: float
    target_norm: float
    errors: dict = field(default_factory=dict)
    relative: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def record(self, name: str, final: SpectralField, u_hat: SpectralField, budget: float):
        err = (final - u_hat).norm(self.k)
        self.errors[name] = float(err)
        rel = err / self.target_norm if self.target_norm > 0 else float(err)
        self.relative[name] = float(rel)
        self.flags[name] = bool(rel <= budget)
        return rel

    @property
    def final_error(self) -> float:
        return self.relative.get("final", float("nan"))

    @property
    def admissible(self) -> bool:
        return all(self.flags.values())

    def as_dict(self) -> dict:
        return _round({
            "schema_version": 1,
            "params": self.params,
            "k": self.k,
            "target_norm": self.target_norm,
            "errors": self.errors,
            "relative": self.relative,
            "flags": self.flags,
            "admissible": self.admissible,
            "stages": self.stages,
            "info": self.info,
        })

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)


class SynthesisContext:
    """Saturation spaces and vertex certifiers shared by repeated runs.

    Parameters
    ----------
    E : subspace, optional
        Generator space; defaults to ``span{c_m, s_m : 0 < |m|_1 <= 2}``
        inside a cutoff-3 truncation.
    cutoff : int
        Truncation used for the truncated saturation.
    """

    def __init__(self, E=None, cutoff: int = 3, seed: int = 0, certificate_terms=(2, 3)):
        self.E = generator_space(2) if E is None else E
        self.cutoff = int(cutoff)
        self.seed = int(seed)
        self.certificate_terms = tuple(certificate_terms)
        self._report = None
        self._certifiers = {}

    def saturation(self, depth: int):
        if self._report is None or len(self._report.steps) < depth:
            self._report = saturation_sequence(self.E, depth, cutoff=self.cutoff)
        return self._report

    def space(self, j: int):
        return self.E if j == 0 else self.saturation(j).spaces[j]

    def step(self, j: int):
        """The saturation step ``E_{j-1} -> E_j``."""
        return self.saturation(j).steps[j - 1]

    def certifier(self, j: int) -> VertexCertifier:
        if j not in self._certifiers:
            step = self.step(j)
            self._certifiers[j] = VertexCertifier(
                step.E, step.directions, cutoff=self.cutoff, compact_terms=self.certificate_terms, seed=self.seed
            )
        return self._certifiers[j]


@dataclass
class StageResult:
    """Output of :func:`relax_stage`."""

    control: ControlSignal
    pwc_control: ControlSignal
    relaxed_shift: ControlSignal
    relaxed_force: ControlSignal
    schedule: object
    info: dict


def relax_stage(ctrl: ControlSignal, j: int, context: SynthesisContext, params: SynthesisParams) -> StageResult:
    """Replace an ``E_j``-valued control by an ``E_{j-1}``-valued one.

    The ``E_{j-1}`` part ``e(t)`` is kept; the complement ``q(t)`` is
    approximated by a piecewise-constant convex control whose vertices are
    certified as ``eta - sum alpha_i B(zeta_i)``, the shifts are switched
    ``n`` times per interval and then absorbed into the control through
    their ramped derivative.
    """
    step = context.step(j)
    Ej = step.E
    certifier = context.certifier(j)
    stats0 = dict(certifier.stats)
    T = ctrl.T
    grid = np.linspace(0.0, T, params.samples_per_interval * params.s + 1)
    if params.split:
        e = reduce_to_subspace(ctrl, Ej)
        q = SumSignal([ctrl, ScaledSignal(e, -1.0)])
        dirs, packed = principal_directions(Ej, step.directions, [q.value(t) for t in grid], rel_tol=1e-9)
        if not dirs:
            raise ValueError("stage control already lies in the lower space")
        modes = packed[0]
        basis = FieldBasis([SpectralField.from_real(modes, v, prune=True) for v in dirs])
        approx = q
    else:
        e = None
        basis = FieldBasis(list(Ej.basis) + [d.direction for d in step.directions])
        approx = ctrl
    first = pwc_approximate(approx, params.s, basis, params.oversample)
    pwc = pwc_approximate(approx, params.s, basis, params.oversample, M=params.margin * first.info["M"])
    forces = [convexify(certifier.certify(v)) for v in pwc.vertices]
    schedule = build_schedule(pwc, forces, mixing=params.mixing)
    zeta = relaxation_control(schedule, params.n, params.order)
    d_min = min(float(mx.weights.min()) for mx in schedule.mixtures)
    width = params.ramp_fraction * d_min * T / (params.s * params.n)
    eta_sig = schedule.eta_signal()
    base = eta_sig if e is None else SumSignal([e, eta_sig])
    control = eliminate_zeta(base, zeta, width, params.ramp_pieces, shape=params.ramp_shape)
    control.subspace = Ej
    pwc_sig = pwc.to_signal()
    pwc_control = pwc_sig if e is None else SumSignal([e, pwc_sig])
    rng = np.random.default_rng(params.seed)
    probes = [lattice_probe(context.cutoff, rng) for _ in range(4)]
    residual = max((f.residual(u) for f in forces if f.p for u in probes), default=0.0)
    bps = zeta.breakpoints()
    info = {
        "stage": j,
        "dim_lower": int(Ej.dim),
        "dim_upper": int(step.E1.dim),
        "active_dim": len(basis),
        "M": float(pwc.info["M"]),
        "vertices": pwc.m,
        "shifts_per_interval": schedule.shifts(),
        "max_shift_norm": max(f.scaled_norm() for f in forces),
        "jumps": int(len(bps) - 2),
        "min_pulse": float(np.diff(bps).min()),
        "min_weight": d_min,
        "ramp_width": float(width),
        "certificates": {key: certifier.stats[key] - stats0[key] for key in stats0},
        "convexification_residual": float(residual),
        "outside": float(pwc.info["outside"]),
    }
    return StageResult(control, pwc_control, zeta, base, schedule, info)


def lattice_probe(cutoff: int, rng) -> SpectralField:
    """Random divergence-free field on the cutoff ball with unit ``L2`` norm."""
    u = random_field(lattice.ball(cutoff), rng, 1.0)
    return (1.0 / u.norm(0)) * u


def synthesize(u0: SpectralField, u_hat: SpectralField, T: float, h=None, stages: int = 1, params: SynthesisParams | None = None, cfg: GalerkinConfig | None = None, context: SynthesisContext | None = None):
    """Control with values in the generator space steering ``u0`` near ``u_hat``.

    The ansatz control is reduced to ``E_stages`` and then brought down one
    saturation level at a time by :func:`relax_stage`.  Every intermediate
    control is simulated and its terminal error recorded.

    Returns
    -------
    eta : ControlSignal
        Values in ``context.E``.
    report : SynthesisReport

    Raises
    ------
    BlowUpError
        If any simulation trips the norm guard.
    """
    params = SynthesisParams() if params is None else params
    cfg = GalerkinConfig() if cfg is None else cfg
    context = SynthesisContext(cutoff=cfg.cutoff) if context is None else context
    if stages < 0:
        raise ValueError("stages must be nonnegative")
    k = cfg.sobolev_k
    report = SynthesisReport(_params_dict(params, stages, T), k, float(u_hat.norm(k)))

    def run(name, control):
        tr = resolve_controlled(u0, control, h, cfg, T=T, record="final")
        return report.record(name, tr.final, u_hat, params.budget)

    _, eta = ansatz_control(u0, u_hat, params.mu, params.delta, T, h, cfg)
    run("ansatz", eta)
    report.info["endpoint_gap"] = float((u0 - heat_semigroup(u0, params.delta)).norm(k))
    report.info["target_gap"] = float((u_hat - heat_semigroup(u_hat, params.mu)).norm(k))
    ctrl = reduce_to_subspace(eta, context.space(stages))
    report.info["dims"] = [int(context.space(j).dim) for j in range(stages + 1)]
    run("reduced", ctrl)
    for j in range(stages, 0, -1):
        res = relax_stage(ctrl, j, context, params)
        info = dict(res.info)
        info["pwc"] = run(f"pwc_{j}", res.pwc_control)
        if params.defect:
            u1 = resolve_controlled(u0, res.pwc_control, h, cfg, T=T, record="all")
            info["defect_sup"] = compute_relaxation_defect(u1, res.relaxed_shift, res.schedule).sup
        info["relaxed"] = run(f"stage_{j}", res.control)
        report.stages.append(info)
        ctrl = res.control
    last = "reduced" if stages == 0 else "stage_1"
    report.errors["final"] = report.errors[last]
    report.relative["final"] = report.relative[last]
    report.flags["final"] = bool(report.relative["final"] <= params.budget)
    return ctrl, report


def _params_dict(params: SynthesisParams, stages: int, T: float) -> dict:
    d = asdict(params)
    d["certificate_terms"] = list(d["certificate_terms"])
    d["stages"] = int(stages)
    d["T"] = float(T)
    return d


@dataclass
class ProjectionResult:
    """Outcome of :func:`exact_projection_iterate`."""

    control: ControlSignal
    error: float
    converged: bool
    iterations: int
    radius: float
    history: list = field(default_factory=list)
    diagnostic: str = ""

    def as_dict(self) -> dict:
        return _round({
            "error": self.error,
            "converged": self.converged,
            "iterations": self.iterations,
            "radius": self.radius,
            "history": self.history,
            "diagnostic": self.diagnostic,
        })


def exact_projection_iterate(u0: SpectralField, u_hat: SpectralField, F, synth, tol: float, max_iter: int = 20, theta: float = 1.0, radius: float | None = None, cfg: GalerkinConfig | None = None, h=None, k: float | None = None, T: float = 1.0) -> ProjectionResult:
    """Hit ``P_F u(T) = P_F u_hat`` by fixed-point iteration on the synthesis target.

    With ``Phi(v) = P_F R_T(u0, synth(v + w))`` and ``w = u_hat - P_F u_hat``
    (zero when ``u_hat`` lies in ``F``) the iterate is
    ``v <- v + theta (P_F u_hat - Phi(v))``, clipped to the ball of radius
    ``radius`` around ``P_F u_hat`` in the ``H^k`` norm.  Each iterate is
    inside the ball.  Non-convergence is reported, not raised.

    Parameters
    ----------
    synth : callable
        ``target -> ControlSignal``.
    radius : float, optional
        Defaults to ``||P_F u_hat||_k`` (or 1 for a zero projection).
    """
    cfg = GalerkinConfig() if cfg is None else cfg
    k = cfg.sobolev_k if k is None else k
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    goal = F.project(u_hat)
    rest = u_hat - goal
    if radius is None:
        radius = goal.norm(k) or 1.0
    v = goal
    best = None
    history = []
    for it in range(1, max_iter + 1):
        control = synth(v + rest)
        end = resolve_controlled(u0, control, h, cfg, T=T, record="final").final
        phi = F.project(end)
        err = float((phi - goal).norm(k))
        history.append({"iteration": it, "error": err, "offset": float((v - goal).norm(k))})
        if best is None or err < best[1]:
            best = (control, err, it)
        if err <= tol:
            return ProjectionResult(control, err, True, it, float(radius), history, "converged")
        v = v + theta * (goal - phi)
        off = (v - goal).norm(k)
        if off > radius:
            v = goal + (radius / off) * (v - goal)
    control, err, it = best
    diag = f"no convergence in {max_iter} iterations; best error {err:.3e} at iteration {it}"
    return ProjectionResult(control, err, False, max_iter, float(radius), history, diag)


def export_breakpoint_table(signal: ControlSignal, basis, path) -> int:
    """Write ``t, c_1 .. c_d`` (coordinates in ``basis``) at every breakpoint to CSV.

    Returns the number of data rows.
    """
    fb = FieldBasis.of(basis)
    bps = np.asarray(signal.breakpoints(), dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"c{i}" for i in range(len(fb))])
        for i, t in enumerate(bps):
            side = "left" if i == len(bps) - 1 else "right"
            w.writerow([repr(float(t))] + [repr(float(c)) for c in fb.coords(signal.value(t, side))])
    return len(bps)
