"""Experiment configuration: TOML files, dotted overrides and validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields

import tomli

from ..sim.integrator import GalerkinConfig
from ..synth.cascade import SynthesisParams

KINDS = ("simulate", "saturate", "synthesize", "pressure", "verify")

DEFAULTS = {
    "kind": "simulate",
    "seed": 0,
    "T": 1.0,
    "galerkin": {"cutoff": 3, "dt": 1e-3, "sobolev_k": 4.0, "guard_factor": 1e3, "record_dt": None},
    "generators": {"radius": 2, "fiber": True},
    "saturation": {"steps": 2, "combo_depth": 2, "cutoff": None},
    "synthesis": {"stages": 1},
    "target": {"radius": 2, "norm": 3.0, "k": 4.0},
    "initial": {"radius": 2, "norm": 3.0, "k": 4.0},
    "projection": {"enabled": False, "radius": 1, "tol": 1e-3, "max_iter": 20, "theta": 1.0},
    "sweep": {"n": []},
    "pressure": {"m": 1, "strategy": "minimal_norm", "iterate": True, "tol": 1e-6, "max_iter": 10, "cutoff_budget": 8, "rule": "fixed", "pressure_norm": 1.0},
    "simulate": {"snapshot_stride": 0},
    "verify": {"checks": []},
    "assert": {},
}

_SECTION_KEYS = {
    "galerkin": {f.name for f in fields(GalerkinConfig)} - {"integrator"},
    "synthesis": {f.name for f in fields(SynthesisParams)} | {"stages"},
}

ASSERTIONS = {
    "synthesize": ("max_relative_error", "monotone_in_n", "max_projection_error"),
    "saturate": ("strictly_increasing", "max_residual", "min_new_complete_fibers"),
    "simulate": ("max_energy_drift",),
    "pressure": ("max_velocity_error", "max_pressure_error", "pressure_within_bound"),
    "verify": ("all_pass",),
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted location of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        here = f"{path}{key}"
        if isinstance(out.get(key), dict):
            if not isinstance(value, dict):
                raise ConfigError(here, "expected a table")
            out[key] = _merge(out[key], value, here + ".")
        else:
            out[key] = value
    return out


def parse_override(text: str):
    """``a.b.c=value`` -> ``(["a", "b", "c"], value)`` with ``value`` read as TOML (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(text, "empty override key")
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides or ():
        keys, value = parse_override(text)
        node = doc
        for i, k in enumerate(keys[:-1]):
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigError(".".join(keys[: i + 1]), "is not a table")
            node = nxt
        node[keys[-1]] = value
    return doc


@dataclass
class ExperimentConfig:
    """Validated experiment description; :attr:`raw` is the merged document."""

    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, overrides=()) -> "ExperimentConfig":
        doc = apply_overrides(doc, overrides)
        merged = _merge(DEFAULTS, doc)
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, path, overrides=(), kind: str | None = None) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML: {exc}") from None
        if kind is not None:
            doc = dict(doc)
            if doc.get("kind", kind) != kind:
                raise ConfigError("kind", f"config declares {doc['kind']!r} but the command is {kind!r}")
            doc["kind"] = kind
        return cls.from_dict(doc, overrides)

    # -- accessors ---------------------------------------------------------

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def kind(self) -> str:
        return self.raw["kind"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def T(self) -> float:
        return float(self.raw["T"])

    def galerkin(self) -> GalerkinConfig:
        g = {k: v for k, v in self.raw["galerkin"].items()}
        return GalerkinConfig(**g)

    def synthesis_params(self) -> SynthesisParams:
        s = {k: v for k, v in self.raw["synthesis"].items() if k != "stages"}
        if "certificate_terms" in s:
            s["certificate_terms"] = tuple(s["certificate_terms"])
        return SynthesisParams(**s)

    @property
    def stages(self) -> int:
        return int(self.raw["synthesis"]["stages"])

    # -- validation --------------------------------------------------------

    def validate(self):
        d = self.raw
        if d["kind"] not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        known = set(DEFAULTS)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown top-level key")
        for section, allowed in _SECTION_KEYS.items():
            for key in d[section]:
                if key not in allowed:
                    raise ConfigError(f"{section}.{key}", "unknown key")
        for section in ("saturation", "target", "initial", "projection", "pressure", "generators", "simulate", "sweep"):
            for key in d[section]:
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"{section}.{key}", "unknown key")
        if not isinstance(d["seed"], int) or isinstance(d["seed"], bool) or d["seed"] < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        if not _pos(d["T"]):
            raise ConfigError("T", "must be positive")
        try:
            g = self.galerkin()
        except (TypeError, ValueError) as exc:
            raise ConfigError("galerkin", str(exc)) from None
        try:
            self.synthesis_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError("synthesis", str(exc)) from None
        if not isinstance(d["synthesis"]["stages"], int) or d["synthesis"]["stages"] < 0:
            raise ConfigError("synthesis.stages", "must be a nonnegative integer")
        for section in ("target", "initial"):
            r = d[section]["radius"]
            if not isinstance(r, int) or r < 1:
                raise ConfigError(f"{section}.radius", "must be a positive integer")
            if r > g.cutoff:
                raise ConfigError(f"{section}.radius", f"exceeds galerkin.cutoff = {g.cutoff}")
            if not (isinstance(d[section]["norm"], (int, float)) and d[section]["norm"] >= 0):
                raise ConfigError(f"{section}.norm", "must be nonnegative")
        gr = d["generators"]["radius"]
        if not isinstance(gr, int) or gr < 1:
            raise ConfigError("generators.radius", "must be a positive integer")
        if gr > g.cutoff:
            raise ConfigError("generators.radius", f"exceeds galerkin.cutoff = {g.cutoff}")
        steps = d["saturation"]["steps"]
        if not isinstance(steps, int) or steps < 0:
            raise ConfigError("saturation.steps", "must be a nonnegative integer")
        sweep = d["sweep"]["n"]
        if not isinstance(sweep, list) or not all(isinstance(x, int) and x >= 1 for x in sweep):
            raise ConfigError("sweep.n", "must be a list of positive integers")
        pr = d["projection"]
        if not isinstance(pr["radius"], int) or pr["radius"] < 1:
            raise ConfigError("projection.radius", "must be a positive integer")
        if not _pos(pr["tol"]):
            raise ConfigError("projection.tol", "must be positive")
        if not isinstance(pr["max_iter"], int) or pr["max_iter"] < 1:
            raise ConfigError("projection.max_iter", "must be a positive integer")
        p = d["pressure"]
        if not isinstance(p["m"], int) or p["m"] < 1:
            raise ConfigError("pressure.m", "must be a positive integer")
        if p["strategy"] not in ("paper_formula", "minimal_norm"):
            raise ConfigError("pressure.strategy", "must be paper_formula or minimal_norm")
        if d["kind"] == "pressure":
            from ..pressure.lift import lift_family

            need = max(q.max_l1() for q in lift_family(p["m"], p["strategy"]).values())
            if need > g.cutoff:
                raise ConfigError("galerkin.cutoff", f"lift wavevectors need cutoff {need}")
            if d["target"]["radius"] > p["m"]:
                raise ConfigError("target.radius", "velocity target must lie in F_m (radius <= pressure.m)")
        allowed = ASSERTIONS.get(d["kind"], ())
        for key in d["assert"]:
            if key not in allowed:
                raise ConfigError(f"assert.{key}", f"not an assertion of kind {d['kind']!r}")

    def echo(self) -> dict:
        """The merged document with ``None`` entries dropped (TOML has no null)."""
        return _drop_none(self.raw)


def _pos(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d
