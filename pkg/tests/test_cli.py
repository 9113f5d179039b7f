import json
import subprocess
import sys

import mpmath as mp
import pytest

from subgeo import __version__
from subgeo.cli import main, render, run


def _rows(argv):
    status, result = run(argv)
    assert status == 0, result
    return result["rows"]


def _entry(rows, gs, gu, t):
    (row,) = [r for r in rows if (r["gamma_star"], r["gamma_upper"], r["t"]) == (gs, gu, t)]
    return row


class TestBounds:
    def test_tail_growth_bound_example(self):
        (row,) = _rows(["bounds", "thm31", "--C", "1", "--kappa", "1", "--alpha", "2",
                        "--phi", "power:1:0.5", "--w0", "1", "--t", "8"])
        # H^{-1}(t) = (t/2 + 1)^2 and the bound is 1 / (4 H^{-1}(t))
        expect = 1 / (4 * (mp.mpf(8) / 2 + 1) ** 2)
        assert row["value"] == pytest.approx(float(expect), rel=1e-12)
        assert row["value"] == pytest.approx(0.01, rel=1e-12)

    def test_mhi_lower_bound_value(self):
        rows = _rows(["bounds", "prop51", "--gamma-star", "4", "--gamma-upper", "6", "--t", "10000"])
        assert round(rows[0]["value"], 4) == 0.0115

    def test_rate_exponents(self):
        status, result = run(["bounds", "ula", "--v", "3", "--d", "2"])
        assert status == 0 and result["exponent"] == 3.0
        status, result = run(["bounds", "rwm", "--m", "0.5"])
        assert result["exponent"] == pytest.approx(1 / 3)

    def test_upper_bounds_run(self):
        rows = _rows(["bounds", "thm44", "--t", "1000"])
        assert 0 <= rows[0]["value"] <= 1 and rows[0]["raw"] > 0
        rows = _rows(["bounds", "prop52", "--t", "1000"])
        assert rows[0]["raw"] > 0

    def test_weak_rate_valid_from(self):
        rows = _rows(["bounds", "thm32", "--t", "8,1000"])
        assert all(r["valid_from"] >= 0 for r in rows)


class TestTables:
    @pytest.mark.parametrize("pair,t,printed", [((3, 5), 1000, "0.0048"), ((4, 6), 10000, "0.0115"),
                                                ((8, 10), 100000, "0.0898")])
    def test_lower_bound_entries(self, pair, t, printed):
        row = _entry(_rows(["table2"]), float(pair[0]), float(pair[1]), float(t))
        assert row["display"] == printed and row["within_last_digit"]

    def test_lower_bounds_within_last_digit(self):
        rows = _rows(["table2"])
        assert len(rows) == 12 and all(r["within_last_digit"] for r in rows)

    def test_upper_bound_printed_and_assumptions(self):
        status, result = run(["table3"])
        assert status == 0
        assert _entry(result["rows"], 1.2, 1.5, 1000)["printed"] == 2.048e-1
        assert _entry(result["rows"], 1.2, 1.7, 10**6)["printed"] == 4.26e-2
        assert result["assumed"]["s_delta"] == 0 and result["assumed"]["r"] == 1.0
        assert all(r["ratio"] > 0 for r in result["rows"])
        assert "# assumed=" in render(result, "csv")

    def test_envelope_shape(self):
        status, result = run(["table1", "--n-t", "7"])
        assert status == 0
        assert len(result["rows"]) == 6 * 7
        assert set(result["final_decade_variation"]) == {f"{g}/{p}" for g in ("exp_linear", "exp_power", "polynomial")
                                                         for p in ("power", "log")}


class TestValidation:
    @pytest.mark.parametrize("argv,field", [
        (["table2", "--gamma-pairs", "5:3"], "gamma_pairs"),
        (["table3", "--gamma-pairs", "1.2:1.995"], "gamma_pairs"),
        (["bounds", "thm31", "--phi", "cubic:1"], "phi"),
        (["bounds", "thm31", "--alpha", "0.5"], "alpha"),
        (["bounds", "prop52", "--gamma-upper", "1.995"], "gamma_upper"),
        (["simulate", "mhi", "--plan", "fixed:9"], "plan"),
        (["simulate", "mhi", "--plan", "wobble"], "plan"),
        (["simulate", "mhi", "--plan", "fixed:4", "--format", "xml"], "format"),
        (["verify", "drift", "--family", "ula"], "family"),
    ])
    def test_field_named(self, argv, field):
        status, result = run(argv)
        assert status == 2
        assert result["error"] == "ConfigError" and result["field"] == field

    def test_failure_json_on_stdout(self, capsys):
        assert main(["table2", "--gamma-pairs", "5:3"]) == 2
        body = json.loads(capsys.readouterr().out)
        assert body["status"] == "error" and body["field"] == "gamma_pairs"

    def test_config_file_and_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\ngamma-star = 3\n--t = 9\nplan = fixed:4\n")
        status, result = run(["simulate", "mhi", "--config", str(cfg)])
        assert status == 0 and result["config"]["t"] == 9 and len(result["rows"]) == 10
        status, result = run(["simulate", "mhi", "--config", str(cfg), "--t", "2"])
        assert result["config"]["t"] == 2

    def test_config_file_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        status, result = run(["table2", "--config", str(cfg)])
        assert status == 2 and result["field"] == "bogus"


class TestSimulate:
    ARGV = ["simulate", "rwm", "--plan", "cov", "--t", "30", "--chains", "3", "--x0", "0.5"]

    def test_deterministic(self, tmp_path):
        (tmp_path / "one").mkdir()
        (tmp_path / "two").mkdir()
        a, b = tmp_path / "one" / "run.csv", tmp_path / "two" / "run.csv"
        assert main(self.ARGV + ["--seed", "4", "--out", str(a)]) == 0
        assert main(self.ARGV + ["--seed", "4", "--out", str(b)]) == 0
        # the output path is echoed in the header; everything below it must match
        body = lambda p: [ln for ln in p.read_text().splitlines() if not ln.startswith("# config=")]
        assert body(a) == body(b)
        manifest = json.loads((tmp_path / "one" / "run.csv.manifest.json").read_text())
        assert manifest["seed"] == 4 and manifest["version"] == __version__

    def test_seed_env_fallback(self, monkeypatch):
        _, explicit = run(self.ARGV + ["--seed", "11"])
        monkeypatch.setenv("SUBGEO_SEED", "11")
        _, env = run(self.ARGV)
        assert render(explicit, "csv") == render(env, "csv")

    def test_output_embeds_config_and_version(self):
        _, result = run(self.ARGV)
        text = render(result, "csv")
        assert f'# version="{__version__}"' in text and '"plan": "cov"' in text
        body = json.loads(render(result, "json"))
        assert body["config"]["chains"] == 3 and len(body["rows"]) == 3 * 31

    def test_oracle_rows(self):
        status, result = run(["simulate", "mhi", "--plan", "fixed:4", "--t", "50", "--chains", "1", "--oracle",
                              "--grid-nodes", "4097"])
        assert status == 0 and result["passed"]
        assert [r["t"] for r in result["rows"]] == list(range(1, 51))
        assert all(r["tv"] >= r["lower_bound"] for r in result["rows"])

    def test_oracle_needs_deterministic_plan(self):
        status, result = run(["simulate", "mhi", "--plan", "sa", "--oracle"])
        assert status == 2 and result["field"] == "oracle"

    @pytest.mark.parametrize("argv", [
        ["simulate", "mhi", "--plan", "alternate:3.5,4.5", "--t", "10"],
        ["simulate", "mhi", "--plan", "sa:0.5:1", "--t", "10", "--chains", "2"],
        ["simulate", "ula", "--plan", "fixed:0.5", "--t", "10", "--x0", "1,2"],
    ])
    def test_plans(self, argv):
        assert run(argv)[0] == 0


class TestVerify:
    def test_mhi_all_default_passes(self):
        status, result = run(["verify", "mhi-all"])
        assert status == 0
        assert set(result["reports"]) == {"growth", "drift", "contraction", "diminishing"}

    def test_mhi_all_boundary_gamma_fails(self, capsys):
        assert main(["verify", "mhi-all", "--growth-gammas", "3,4,5"]) == 1
        assert json.loads(capsys.readouterr().err)["failed"] == ["growth"]

    def test_stationarity(self):
        status, result = run(["verify", "stationarity", "--grid-nodes", "4097"])
        assert status == 0 and result["passed"]

    def test_drift_mhi(self):
        status, result = run(["verify", "drift"])
        assert status == 0 and set(result["reports"]) == {"drift", "contraction"}

    def test_growth_ula_small(self):
        status, result = run(["verify", "growth", "--family", "ula", "--n", "5000", "--x-grid", "0,2,5"])
        assert status == 0

    def test_diminishing_mhi(self):
        status, result = run(["verify", "diminishing", "--pairs", "10"])
        assert status == 0 and all(r["margin"] >= 0 for r in result["rows"])


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "subgeo.cli", "bounds", "prop51", "--t", "1000", "--format", "json"],
                         capture_output=True, text=True, check=True)
    assert round(json.loads(out.stdout)["rows"][0]["value"], 4) == 0.0048
