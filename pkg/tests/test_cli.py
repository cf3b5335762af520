import csv
import hashlib
import json

import numpy as np
import pytest

from twofluid.cli import build_parser, load_config_file, main, resolve, UsageError
from twofluid.linear_stability import nu_crit
from twofluid.spectral_core import DomainConfig, SpectralState


def run(*argv):
    return main([str(a) for a in argv])


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


class TestExitCodes:
    def test_usage_errors(self, tmp_path, capsys):
        assert run("stability", "--L1", "-1", "--out", tmp_path) == 2
        assert run("nonexistent") == 2
        assert run("hopf", "--nu", "0", "--out", tmp_path) == 2
        assert run("energy", "--dT", "0", "--out", tmp_path) == 2
        assert run("spectrum", "--dT-range", "0:1", "--out", tmp_path) == 2
        assert run("stability", "--threads", "0", "--out", tmp_path) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert run("stability", "--config", tmp_path / "missing.json", "--out", tmp_path) == 2

    def test_numerical_failure(self, tmp_path):
        code = run("simulate", "--dt", 2.0, "--t-end", 2000, "--N", 8, "--ic", "random",
                   "--amplitude", 2.0, "--seed", 6, "--out", tmp_path)
        assert code == 1

    def test_help_and_version(self, capsys):
        assert run("--version") == 0
        assert "twofluid" in capsys.readouterr().out


class TestConfigPrecedence:
    def args(self, *argv):
        return build_parser().parse_args([str(a) for a in argv])

    def test_defaults(self):
        conf = resolve(self.args("stability"))
        assert conf["domain.L1"] == 2.0 and conf["domain.nu"] == pytest.approx(9e-4)

    @pytest.mark.parametrize("fmt", ["json", "ini"])
    def test_flags_beat_file_beat_defaults(self, tmp_path, fmt):
        if fmt == "json":
            p = tmp_path / "c.json"
            p.write_text(json.dumps({"domain": {"L1": 3.0, "nu": 0.002}, "integrator": {"dt": 0.01}}))
        else:
            p = tmp_path / "c.ini"
            p.write_text("[domain]\nL1 = 3\nnu = 0.002\n[integrator]\ndt = 0.01\n")
        conf = resolve(self.args("simulate", "--config", p, "--nu", "0.005"))
        assert conf["domain.L1"] == 3.0          # from file
        assert conf["domain.nu"] == 0.005        # flag wins
        assert conf["integrator.dt"] == 0.01
        assert conf["domain.L2"] == 2.0          # default

    def test_dotted_json_and_unknown_section(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"domain.L2": 4.0}))
        assert load_config_file(p)["domain.L2"] == 4.0
        p.write_text(json.dumps({"plot": {"dpi": 3}}))
        with pytest.raises(UsageError):
            load_config_file(p)


class TestCommands:
    def test_spectrum_default_rows(self, tmp_path):
        assert run("spectrum", "--dT-range", "0:0.2:3", "--out", tmp_path) == 0
        rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
        assert len(rows) == 3 * 10 * 21
        m = manifest(tmp_path)
        assert m["command"] == "spectrum"
        digest = hashlib.sha256((tmp_path / "spectrum.csv").read_bytes()).hexdigest()
        assert m["outputs"]["spectrum.csv"] == digest

    def test_spectrum_continuous(self, tmp_path):
        assert run("spectrum", "--continuous-k2", "0.01:1:50", "--L1", 1, "--dT", 0.2, "--out", tmp_path) == 0
        table = np.loadtxt(tmp_path / "dispersion.csv", delimiter=",", skiprows=1)
        assert table.shape == (50, 3)

    def test_stability_reports_primary(self, tmp_path):
        assert run("stability", "--out", tmp_path) == 0
        rep = json.loads((tmp_path / "stability.json").read_text())
        assert rep["primary"]["classification"] == "primary"
        assert rep["dT_star"] == pytest.approx(8 / np.pi**2)

    def test_hopf(self, tmp_path):
        assert run("hopf", "--mu1", 0.001, "--out", tmp_path) == 0
        rep = json.loads((tmp_path / "hopf.json").read_text())
        assert set(rep) >= {"left", "right", "domain"}

    def test_hopf_degenerate_requires_critical_nu(self, tmp_path):
        assert run("hopf", "--degenerate", "--out", tmp_path) == 2
        cfg = DomainConfig.from_dT(L1=2.0, L2=2.0, nu=9e-4, dT=0.1)
        nc = nu_crit(cfg, 1)
        assert run("hopf", "--degenerate", "--nu", repr(float(nc)), "--which", "left", "--out", tmp_path) == 0
        assert "degenerate" in json.loads((tmp_path / "hopf.json").read_text())

    def test_simulate_outputs_and_determinism(self, tmp_path):
        argv = ("simulate", "--dt", 0.05, "--t-end", 2.0, "--N", 6, "--ic", "random",
                "--amplitude", 0.1, "--seed", 3, "--snapshot", 1.0)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*argv, "--out", a) == 0
        assert run(*argv, "--out", b) == 0
        ma, mb = manifest(a), manifest(b)
        assert {"traces.csv", "final_state.json"} <= set(ma["outputs"])
        assert sum(k.startswith("snapshots/") for k in ma["outputs"]) == 1
        assert ma["outputs"] == mb["outputs"]
        s = SpectralState.load_json(a / "final_state.json")
        assert s.coeffs.shape == (6, 13, 2)

    def test_simulate_resume_from_state(self, tmp_path):
        assert run("simulate", "--dt", 0.05, "--t-end", 1.0, "--N", 6, "--out", tmp_path / "a") == 0
        assert run("simulate", "--dt", 0.05, "--t-end", 1.0, "--N", 6,
                   "--state", tmp_path / "a" / "final_state.json", "--out", tmp_path / "b") == 0

    def test_continue(self, tmp_path):
        assert run("continue", "--dT-start", -0.02, "--dT-end", -0.01, "--dT-step", 0.01,
                   "--transient", 5, "--window", 5, "--dt", 0.05, "--N", 6, "--amplitude", 1e-6,
                   "--out", tmp_path) == 0
        rows = list(csv.DictReader(open(tmp_path / "bifurcation.csv")))
        assert len(rows) == 2 and all(r["classification"] == "steady" for r in rows)
        assert "bifurcation.csv" in manifest(tmp_path)["outputs"]
        assert run("continue", "--dT-start", 0, "--dT-end", 1, "--dT-step", 0, "--out", tmp_path) == 2

    def test_energy(self, tmp_path):
        assert run("energy", "--dT", -0.1, "--N", 6, "--ic", "random", "--amplitude", 0.1,
                   "--out", tmp_path / "e") == 0
        rep = json.loads((tmp_path / "e" / "energy.json").read_text())
        assert rep["lyapunov"] is True
        assert run("energy", "--decay", "--dT", 0.1, "--out", tmp_path / "f") == 2
        assert run("energy", "--decay", "--dT", 1.0, "--dt", 0.05, "--t-end", 20, "--N", 6,
                   "--ic", "random", "--amplitude", 0.01, "--out", tmp_path / "g") == 0
        rep = json.loads((tmp_path / "g" / "energy.json").read_text())
        assert rep["decay"]["passed"] is True
