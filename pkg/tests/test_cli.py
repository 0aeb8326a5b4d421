import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from phaselab.cli import ConfigError, load_config, main

SMALL = ["--set", "points=9", "--set", "rho_min=1.0", "--set", "rho_max=3.0"]


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_defaults(self):
        cfg = load_config("phase-diagram", {})
        assert cfg["n"] == 2
        assert cfg["model"] == {"preset": "HYSTERESIS"}
        assert len(cfg["rho_grid"]) == 141

    def test_explicit_grid(self):
        cfg = load_config("rates", {"rho_grid": [0.5, 1.0, 1.5]})
        np.testing.assert_array_equal(cfg["rho_grid"], [0.5, 1.0, 1.5])

    @pytest.mark.parametrize(
        "command, raw",
        [
            ("rates", {"colour": "red"}),
            ("rates", {"points": 0}),
            ("soh", {"branch": 3}),
            ("hysteresis", {"n": 3}),
            ("phase-diagram", {"formats": "csv,pdf"}),
        ],
    )
    def test_rejects(self, command, raw):
        with pytest.raises(ConfigError):
            load_config(command, raw)


class TestExitCodes:
    def test_success(self, tmp_path):
        assert run(tmp_path, "phase-diagram", *SMALL) == 0
        assert (tmp_path / "phase_diagram.csv").exists()
        assert (tmp_path / "phase_diagram.json").exists()

    def test_unknown_key(self, tmp_path, capsys):
        assert run(tmp_path, "rates", "--set", "bogus=1") == 1
        assert "bogus" in capsys.readouterr().err

    def test_empty_grid(self, tmp_path):
        assert run(tmp_path, "soh", "--set", "points=0") == 1

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("[1, 2]")
        assert run(tmp_path, "rates", "--config", str(cfg)) == 1

    def test_argparse_error_exits_one(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(tmp_path, "hysteresis", "--engine", "quantum")
        assert exc.value.code == 1

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "phaselab.cli", "rates", *SMALL, "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0
        assert "rates.csv" in res.stdout


class TestOutputs:
    def test_csv_is_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a, "soh", *SMALL) == 0
        assert run(b, "soh", *SMALL) == 0
        assert (a / "soh.csv").read_bytes() == (b / "soh.csv").read_bytes()

    def test_json_echoes_config(self, tmp_path):
        run(tmp_path, "free-energy", *SMALL)
        doc = json.loads((tmp_path / "free_energy.json").read_text())
        assert doc["command"] == "free-energy"
        assert doc["config"]["points"] == 9
        assert 1.3726 < doc["result"]["rho1"] < 2.0

    def test_format_selection(self, tmp_path):
        run(tmp_path, "rates", *SMALL, "--format", "svg")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["rates.svg"]

    def test_unstable_branches_dashed(self, tmp_path):
        run(tmp_path, "phase-diagram", *SMALL, "--format", "svg")
        svg = (tmp_path / "phase_diagram.svg").read_text()
        assert svg.startswith("<svg") or svg.startswith("<?xml")
        assert "stroke-dasharray" in svg

    def test_soh_columns(self, tmp_path):
        run(tmp_path, "soh", *SMALL)
        header = read_csv(tmp_path / "soh.csv")[0]
        for col in ("rho", "kappa", "c1", "c2", "theta", "delta", "lambda0", "lambda_kappa", "K2"):
            assert col in header

    def test_phase_diagram_several_models(self, tmp_path):
        models = json.dumps([{"preset": "HYSTERESIS"}, {"preset": "LINEAR"}])
        assert run(tmp_path, "phase-diagram", *SMALL, "--set", f"models={models}") == 0
        labels = {r[0] for r in read_csv(tmp_path / "phase_diagram.csv")[1:]}
        assert len(labels) == 2


class TestHysteresisCommand:
    def test_short_kinetic_run_with_theory_overlay(self, tmp_path):
        code = run(tmp_path, "hysteresis", "--set", "T=5", "--set", "m=32", "--format", "csv,json,svg")
        assert code == 0
        rows = read_csv(tmp_path / "hysteresis.csv")
        assert rows[0] == ["t", "rho", "c1", "free_energy"]
        assert float(rows[-1][0]) == pytest.approx(10.0)
        theory = read_csv(tmp_path / "hysteresis_theory.csv")
        assert len(theory) > 1
        doc = json.loads((tmp_path / "hysteresis.json").read_text())
        assert doc["result"]["rho_star"] == pytest.approx(1.3726, abs=1e-4)
        assert "stroke-dasharray" in (tmp_path / "hysteresis.svg").read_text()

    def test_particle_engine(self, tmp_path):
        code = run(tmp_path, "hysteresis", "--engine", "particle", "--set", "T=2", "--set", "N=100", "--seed", "3")
        assert code == 0
        doc = json.loads((tmp_path / "hysteresis.json").read_text())
        assert doc["result"]["rayleigh_baseline"] == pytest.approx(0.0886226925, rel=1e-8)
        assert doc["config"]["seed"] == 3
        assert read_csv(tmp_path / "hysteresis.csv")[0] == ["t", "rho", "c1"]

    def test_bad_protocol_is_config_error(self, tmp_path):
        assert run(tmp_path, "hysteresis", "--set", "rho_const=-1.0", "--set", "T=1") == 1
