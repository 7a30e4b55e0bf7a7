import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eulerctl.harness import (
    ConfigError,
    ExperimentConfig,
    generate_pressure_target,
    generate_target,
    parse_override,
    reference_pair,
    run,
    run_checks,
)
from eulerctl.harness.cli import main

FAST_SYNTH = [
    "galerkin.cutoff=2",
    "galerkin.dt=1e-2",
    "generators.radius=1",
    "target.radius=1",
    "initial.radius=1",
    "target.norm=0.2",
    "initial.norm=0.2",
    "synthesis.s=4",
    "synthesis.n=4",
]


class TestConfig:
    def test_defaults_validate(self):
        for kind in ("simulate", "saturate", "synthesize", "verify"):
            assert ExperimentConfig.from_dict({"kind": kind}).kind == kind

    @pytest.mark.parametrize(
        "text, keys, value",
        [
            ("a.b=3", ["a", "b"], 3),
            ("x=1e-3", ["x"], 1e-3),
            ("s=[8, 16]", ["s"], [8, 16]),
            ("name=minimal_norm", ["name"], "minimal_norm"),
            ("flag=true", ["flag"], True),
        ],
    )
    def test_parse_override(self, text, keys, value):
        assert parse_override(text) == (keys, value)

    def test_override_applies(self):
        cfg = ExperimentConfig.from_dict({"kind": "synthesize"}, ["synthesis.n=8", "sweep.n=[4, 8]"])
        assert cfg.synthesis_params().n == 8 and cfg["sweep"]["n"] == [4, 8]

    @pytest.mark.parametrize(
        "doc, path",
        [
            ({"kind": "bogus"}, "kind"),
            ({"galerkin": {"cutof": 3}}, "galerkin.cutof"),
            ({"seed": -1}, "seed"),
            ({"T": 0}, "T"),
            ({"target": {"radius": 5}}, "target.radius"),
            ({"synthesis": {"margin": 0.5}}, "synthesis"),
            ({"sweep": {"n": [0]}}, "sweep.n"),
            ({"kind": "simulate", "assert": {"monotone_in_n": True}}, "assert.monotone_in_n"),
            ({"kind": "pressure"}, "galerkin.cutoff"),
            ({"unknown": 1}, "unknown"),
        ],
    )
    def test_errors_name_the_field(self, doc, path):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(doc)
        assert info.value.path == path

    def test_toml_file(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('kind = "synthesize"\nseed = 4\n[synthesis]\nn = 8\n')
        cfg = ExperimentConfig.from_toml(p, ["synthesis.s=4"])
        assert cfg.seed == 4 and cfg.synthesis_params().n == 8 and cfg.synthesis_params().s == 4
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(p, kind="simulate")

    def test_bad_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("kind = \n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(p)

    def test_echo_drops_none(self):
        echo = ExperimentConfig.from_dict({}).echo()
        assert "cutoff" not in echo["saturation"] and "record_dt" not in echo["galerkin"]


class TestTargets:
    @given(st.integers(0, 10**6), st.integers(1, 3), st.floats(0.1, 10.0))
    def test_normalized_and_reproducible(self, seed, radius, norm):
        spec = {"radius": radius, "norm": norm, "k": 4.0}
        a, b = generate_target(spec, seed), generate_target(spec, seed)
        assert (a - b).norm() == 0.0
        assert abs(a.norm(4) - norm) <= 1e-12 * norm
        assert a.max_l1() <= radius

    def test_streams_differ(self):
        spec = {"radius": 2, "norm": 1.0, "k": 4.0}
        assert (generate_target(spec, 0, "target") - generate_target(spec, 0, "initial")).norm() > 0

    def test_zero_norm(self):
        assert len(generate_target({"radius": 2, "norm": 0.0}, 0)) == 0

    def test_empty_subspace(self):
        with pytest.raises(ValueError):
            generate_target({"modes": [], "norm": 1.0}, 0)

    def test_explicit_modes(self):
        u = generate_target({"modes": [[-1, 0, 0], [0, 1, 1]], "norm": 2.0, "k": 0.0}, 3)
        assert sorted(map(tuple, u.modes.tolist())) == [(0, 1, 1), (1, 0, 0)]

    def test_pressure_target(self):
        p = generate_pressure_target({"radius": 1, "norm": 0.5, "k": 4.0}, 1)
        assert np.isclose(p.norm(4), 0.5)

    def test_reference_pair(self):
        uh, u0 = reference_pair(1)
        assert np.isclose(uh.norm(4), 3.0) and np.isclose(u0.norm(4), 3.0)
        assert (reference_pair(1)[0] - uh).norm() == 0.0


class TestRun:
    def test_verify_checks(self):
        rows = run_checks(["skew_symmetry", "pressure_lift"])
        assert [r.name for r in rows] == ["skew_symmetry", "pressure_lift"] and all(r.passed for r in rows)

    def test_cli_verify(self, tmp_path, capsys):
        assert main(["verify", "--out", str(tmp_path), "--override", 'verify.checks=["skew_symmetry", "energy_drift"]']) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["schema_version"] == 1 and rep["assertions"]["all_pass"]["passed"]
        assert (tmp_path / "checks.csv").read_text().startswith("name,value,threshold,passed")

    def test_config_error_exit(self, tmp_path, capsys):
        assert main(["simulate", "--out", str(tmp_path), "--override", "galerkin.cutof=3"]) == 2
        assert "galerkin.cutof" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.toml"), "--out", str(tmp_path)]) == 2

    def test_assertion_failure_exit(self, tmp_path):
        code = main(["simulate", "--out", str(tmp_path), "--override", "T=0.05", "--override", "assert.max_energy_drift=-1.0"])
        assert code == 1

    def test_guard_exit(self, tmp_path):
        code = main(["simulate", "--out", str(tmp_path), "--override", "T=0.05", "--override", "galerkin.guard_factor=1e-3"])
        assert code == 3
        assert json.loads((tmp_path / "report.json").read_text())["status"] == 3

    def test_simulate_artifacts(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"kind": "simulate", "T": 0.1, "simulate": {"snapshot_stride": 50}})
        assert run(cfg, str(tmp_path)) == 0
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["seed"] == 0 and man["config"]["T"] == 0.1 and "numpy" in man["versions"]
        assert all((tmp_path / f).exists() for f in man["files"])
        assert len(list(tmp_path.glob("trajectory_*.json"))) == 3

    def test_saturate_small(self, tmp_path):
        ov = ["galerkin.cutoff=3", "generators.radius=1", "assert.strictly_increasing=true", "assert.max_residual=1e-9", "assert.min_new_complete_fibers=1"]
        assert main(["saturate", "--out", str(tmp_path)] + sum((["--override", o] for o in ov), [])) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        dims = rep["result"]["dims"]
        assert dims == sorted(dims) and rep["result"]["oracle_residual"] < 1e-9

    def test_synthesize_small(self, tmp_path):
        ov = FAST_SYNTH + ["sweep.n=[2, 4]", "assert.max_relative_error=0.5"]
        assert main(["synthesize", "--out", str(tmp_path)] + sum((["--override", o] for o in ov), [])) == 0
        sweep = (tmp_path / "sweep.csv").read_text().splitlines()
        assert sweep[0] == "n,relative_error,error" and len(sweep) == 3
        assert (tmp_path / "control.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"kind": "synthesize"}, FAST_SYNTH)
        run(cfg, str(tmp_path / "a"))
        run(cfg, str(tmp_path / "b"))
        for name in ("report.json", "manifest.json", "sweep.csv", "control.csv", "target.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_pressure_small(self, tmp_path):
        ov = [
            "galerkin.cutoff=4",
            "target.radius=1",
            "initial.radius=1",
            "target.norm=0.5",
            "initial.norm=0.5",
            "pressure.pressure_norm=0.1",
            "pressure.iterate=false",
            "synthesis.s=4",
            "synthesis.n=4",
            "generators.radius=3",
            "assert.pressure_within_bound=true",
        ]
        assert main(["pressure", "--out", str(tmp_path)] + sum((["--override", o] for o in ov), [])) == 0
        rep = json.loads((tmp_path / "report.json").read_text())["result"]
        assert rep["lift_residual"] < 1e-12 and rep["lift_cutoff"] == 4
        assert (tmp_path / "quadruples.csv").exists()
