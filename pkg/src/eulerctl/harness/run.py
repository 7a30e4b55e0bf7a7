"""Experiment orchestration and artifact writing."""

from __future__ import annotations

import csv
import json
import os
import platform
from importlib import metadata

import numpy as np

from ..pressure.steer import steer_velocity_pressure
from ..saturation.certificates import verify_certificate_on_grid
from ..saturation.fibers import FiberSubspace
from ..saturation.saturate import generator_space, saturation_sequence
from ..sim.diagnostics import export_trajectory
from ..sim.integrator import BlowUpError, resolve
from ..spectral import io as field_io
from ..synth.cascade import SynthesisContext, _round, exact_projection_iterate, export_breakpoint_table, synthesize
from .checks import run_checks
from .config import ConfigError, ExperimentConfig
from .targets import generate_pressure_target, generate_target

EXIT_PASS, EXIT_ASSERT, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3
SCHEMA_VERSION = 1


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba", "tomli"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_round(doc), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


class _Outcome:
    def __init__(self):
        self.report = {}
        self.assertions = {}
        self.files = []

    def check(self, name, passed, value=None):
        self.assertions[name] = {"passed": bool(passed), "value": value}


def _simulate(cfg: ExperimentConfig, out: str, res: _Outcome):
    g = cfg.galerkin()
    u0 = generate_target(cfg["initial"], cfg.seed, "initial")
    tr = resolve(u0, None, None, g, T=cfg.T, record="auto")
    e = tr.norms(0) ** 2
    drift = float(np.abs(e / e[0] - 1).max()) if e[0] > 0 else 0.0
    div = max(tr.state(i).divergence_residual() for i in range(len(tr)))
    csv_path = export_trajectory(tr, out, stride=int(cfg["simulate"]["snapshot_stride"]))
    res.files.append(os.path.basename(csv_path))
    field_io.save(u0, os.path.join(out, "initial.json"))
    field_io.save(tr.final, os.path.join(out, "final.json"))
    res.files += ["initial.json", "final.json"]
    res.report = {"energy_drift": drift, "divergence_residual": float(div), "steps": len(tr) - 1, "final_norm_k": tr.final.norm(g.sobolev_k)}
    if "max_energy_drift" in cfg["assert"]:
        res.check("max_energy_drift", drift <= cfg["assert"]["max_energy_drift"], drift)


def _saturate(cfg: ExperimentConfig, out: str, res: _Outcome):
    s = cfg["saturation"]
    gen = cfg["generators"]
    E = generator_space(gen["radius"], gen["fiber"])
    cutoff = cfg.galerkin().cutoff if s["cutoff"] is None else s["cutoff"]
    rep = saturation_sequence(E, s["steps"], s["combo_depth"], cutoff=cutoff)
    doc = rep.as_dict()
    oracle = max([max(verify_certificate_on_grid(d.plus), verify_certificate_on_grid(d.minus)) for d in rep.certificates()], default=0.0)
    doc["oracle_residual"] = oracle
    new_full = [m for m in rep.complete_fibers(len(rep.spaces) - 1) if sum(abs(x) for x in m) > gen["radius"]]
    doc["new_complete_fibers"] = len(new_full)
    res.report = doc
    _write_csv(os.path.join(out, "fibers.csv"), ["m1", "m2", "m3", "stage", "dimension"], [(f["m"][0], f["m"][1], f["m"][2], f["stage"], f["dimension"]) for f in doc["fibers"]])
    res.files.append("fibers.csv")
    a = cfg["assert"]
    if a.get("strictly_increasing"):
        res.check("strictly_increasing", all(x < y for x, y in zip(rep.dims, rep.dims[1:])), rep.dims)
    if "max_residual" in a:
        worst = max(doc["max_certificate_residual"], oracle)
        res.check("max_residual", worst < a["max_residual"], worst)
    if "min_new_complete_fibers" in a:
        res.check("min_new_complete_fibers", len(new_full) >= a["min_new_complete_fibers"], len(new_full))


def _synthesize(cfg: ExperimentConfig, out: str, res: _Outcome):
    g = cfg.galerkin()
    params = cfg.synthesis_params()
    gen = cfg["generators"]
    ctx = SynthesisContext(generator_space(gen["radius"], gen["fiber"]), cutoff=g.cutoff, seed=params.seed, certificate_terms=params.certificate_terms)
    u_hat = generate_target(cfg["target"], cfg.seed, "target")
    u0 = generate_target(cfg["initial"], cfg.seed, "initial")
    ns = cfg["sweep"]["n"] or [params.n]
    runs, rows = [], []
    eta = None
    for n in ns:
        eta, rep = synthesize(u0, u_hat, cfg.T, None, cfg.stages, params.with_(n=n), g, ctx)
        runs.append(rep.as_dict())
        rows.append((n, rep.relative["final"], rep.errors["final"]))
    _write_csv(os.path.join(out, "sweep.csv"), ["n", "relative_error", "error"], rows)
    export_breakpoint_table(eta, ctx.E, os.path.join(out, "control.csv"))
    field_io.save(u_hat, os.path.join(out, "target.json"))
    field_io.save(u0, os.path.join(out, "initial.json"))
    res.files += ["sweep.csv", "control.csv", "target.json", "initial.json"]
    res.report = {"runs": runs, "sweep": [{"n": n, "relative_error": r} for n, r, _ in rows]}
    a = cfg["assert"]
    if "max_relative_error" in a:
        res.check("max_relative_error", rows[-1][1] < a["max_relative_error"], rows[-1][1])
    if a.get("monotone_in_n"):
        errs = [r for _, r, _ in rows]
        res.check("monotone_in_n", all(y <= x for x, y in zip(errs, errs[1:])), errs)
    pr = cfg["projection"]
    if pr["enabled"]:
        F = FiberSubspace.ball(pr["radius"])
        p = params.with_(n=ns[-1])
        out_it = exact_projection_iterate(u0, u_hat, F, lambda tg: synthesize(u0, tg, cfg.T, None, cfg.stages, p, g, ctx)[0], pr["tol"], pr["max_iter"], pr["theta"], cfg=g, T=cfg.T)
        res.report["projection"] = out_it.as_dict()
        if "max_projection_error" in a:
            res.check("max_projection_error", out_it.error < a["max_projection_error"], out_it.error)


def _pressure(cfg: ExperimentConfig, out: str, res: _Outcome):
    from ..pressure.lift import export_quadruples_csv, lift_family

    g = cfg.galerkin()
    p = cfg["pressure"]
    params = cfg.synthesis_params()
    gen = cfg["generators"]
    ctx = SynthesisContext(generator_space(gen["radius"], gen["fiber"]), cutoff=g.cutoff, seed=params.seed, certificate_terms=params.certificate_terms)
    u_hat = generate_target(cfg["target"], cfg.seed, "target")
    u0 = generate_target(cfg["initial"], cfg.seed, "initial")
    p_hat = generate_pressure_target({"radius": p["m"], "norm": p["pressure_norm"], "k": cfg["target"]["k"]}, cfg.seed)
    eta, rep = steer_velocity_pressure(u0, u_hat, p_hat, cfg.T, None, g, params, p["m"], p["strategy"], cfg.stages, ctx, p["iterate"], p["tol"], p["max_iter"], p["cutoff_budget"], p["rule"])
    export_quadruples_csv(lift_family(p["m"], p["strategy"]), os.path.join(out, "quadruples.csv"))
    field_io.save(u_hat, os.path.join(out, "target.json"))
    field_io.save(p_hat, os.path.join(out, "pressure_target.json"))
    res.files += ["quadruples.csv", "target.json", "pressure_target.json"]
    res.report = rep.as_dict()
    a = cfg["assert"]
    if "max_velocity_error" in a:
        res.check("max_velocity_error", rep.velocity_error < a["max_velocity_error"], rep.velocity_error)
    if "max_pressure_error" in a:
        res.check("max_pressure_error", rep.pressure_error < a["max_pressure_error"], rep.pressure_error)
    if a.get("pressure_within_bound"):
        res.check("pressure_within_bound", rep.pressure_error <= rep.pressure_bound * (1 + 1e-9) + 1e-14, rep.pressure_bound)


def _verify(cfg: ExperimentConfig, out: str, res: _Outcome):
    try:
        results = run_checks(cfg["verify"]["checks"], cfg.seed)
    except KeyError as exc:
        raise ConfigError("verify.checks", str(exc.args[0])) from None
    rows = [r.as_row() for r in results]
    _write_csv(os.path.join(out, "checks.csv"), ["name", "value", "threshold", "passed"], [(r["name"], r["value"], r["threshold"], r["passed"]) for r in rows])
    res.files.append("checks.csv")
    res.report = {"checks": rows}
    res.check("all_pass", all(r["passed"] for r in rows), sum(not r["passed"] for r in rows))


RUNNERS = {"simulate": _simulate, "saturate": _saturate, "synthesize": _synthesize, "pressure": _pressure, "verify": _verify}


def run(config: ExperimentConfig, out_dir: str) -> int:
    """Run one experiment and write its artifacts into ``out_dir``.

    Writes ``manifest.json`` (config echo, versions, seed, file list) and
    ``report.json``; the exit status is 0 when every configured assertion
    holds, 1 on an assertion failure and 3 when the norm guard trips.
    """
    os.makedirs(out_dir, exist_ok=True)
    res = _Outcome()
    status = EXIT_PASS
    error = None
    try:
        RUNNERS[config.kind](config, out_dir, res)
    except BlowUpError as exc:
        status, error = EXIT_GUARD, str(exc)
    if status == EXIT_PASS and not all(a["passed"] for a in res.assertions.values()):
        status = EXIT_ASSERT
    report = {"schema_version": SCHEMA_VERSION, "kind": config.kind, "seed": config.seed, "result": res.report, "assertions": res.assertions, "status": status}
    if error:
        report["error"] = error
    _write_json(os.path.join(out_dir, "report.json"), report)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": config.kind,
        "seed": config.seed,
        "config": config.echo(),
        "versions": _versions(),
        "files": sorted(["report.json"] + res.files),
        "status": status,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return status
