import csv
import json
import subprocess
import sys

import pytest

RUN = [sys.executable, "-m", "suprec.cli"]


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run_cli(*args):
    return subprocess.run(RUN + list(args), capture_output=True, text=True)


def read_rows(path):
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


BINARY_SIM = {"mode": "binary", "N": 10, "M": 8, "K": 2, "T": [1, 2], "sigma2": 0.5,
              "trials": 200, "S0": [0, 1], "S1": [2, 3]}


class TestExitCodes:
    def test_success_is_zero(self, tmp_path):
        cfg = write_config(tmp_path, {"queries": [{"formula": "fano_lower", "beta": 0.1, "L": 4}]})
        assert run_cli("bounds", "--config", cfg).returncode == 0

    def test_config_error_is_two_and_writes_nothing(self, tmp_path):
        cfg = write_config(tmp_path, {"queries": [{"formula": "nope"}]})
        out = tmp_path / "out.csv"
        result = run_cli("bounds", "--config", cfg, "--out", str(out))
        assert result.returncode == 2
        assert "queries[0]" in result.stderr
        assert not out.exists()

    def test_missing_key_diagnostic(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "binary", "N": 10})
        result = run_cli("simulate", "--config", cfg)
        assert result.returncode == 2
        assert "missing required key" in result.stderr

    def test_cap_error_is_three(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "multiple", "N": 60, "M": 8, "K": 12,
                                      "T": 1, "sigma2": 1.0, "trials": 10})
        result = run_cli("simulate", "--config", cfg)
        assert result.returncode == 3
        assert "cap" in result.stderr

    def test_unreadable_config(self, tmp_path):
        assert run_cli("bounds", "--config", str(tmp_path / "missing.json")).returncode == 2


class TestBoundsCommand:
    def test_geometric_query_value(self, tmp_path):
        cfg = write_config(tmp_path, {"queries": [
            {"formula": "multiple_geometric", "lambda_bar": 10, "N": 3, "K": 1, "T": 2, "kappa": 1}]})
        result = run_cli("bounds", "--config", cfg, "--format", "json")
        payload = json.loads(result.stdout)
        assert payload["records"][0]["clamped"] == pytest.approx(0.23529, abs=1e-5)

    def test_inapplicable_is_data_not_error(self, tmp_path):
        cfg = write_config(tmp_path, {"queries": [
            {"formula": "multiple_geometric", "lambda_bar": 4.0, "N": 3, "K": 1, "T": 2, "kappa": 1}]})
        result = run_cli("bounds", "--config", cfg, "--format", "json")
        assert result.returncode == 0
        assert json.loads(result.stdout)["records"][0]["applicable"] is False


class TestSimulateCommand:
    def test_schema_and_trend_over_T(self, tmp_path):
        cfg = write_config(tmp_path, {**BINARY_SIM, "T": [1, 2, 4, 8]})
        out = tmp_path / "sim.csv"
        assert run_cli("simulate", "--config", cfg, "--seed", "3", "--out", str(out)).returncode == 0
        rows = read_rows(out)
        assert len(rows) == 4
        header = open(out).readline().strip()
        assert header == ("mode,N,M,K,T,sigma2,seed,trials,p_hat,ci_low,ci_high,"
                          "chernoff_clamped,fano_clamped,lambda_bar")
        p_hats = [float(r["p_hat"]) for r in rows]
        assert all(a >= b for a, b in zip(p_hats, p_hats[1:]))
        assert all(r["seed"] == "3" for r in rows)

    def test_noise_sweep_trend(self, tmp_path):
        cfg = write_config(tmp_path, {**BINARY_SIM, "T": 2, "sigma2": [0.01, 0.1, 1.0],
                                      "trials": 400})
        out = tmp_path / "sim.csv"
        run_cli("simulate", "--config", cfg, "--seed", "4", "--out", str(out))
        p_hats = [float(r["p_hat"]) for r in read_rows(out)]
        assert all(a <= b for a, b in zip(p_hats, p_hats[1:]))

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, BINARY_SIM)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("simulate", "--config", cfg, "--seed", "5", "--out", str(a))
        run_cli("simulate", "--config", cfg, "--seed", "5", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_threads_never_change_output(self, tmp_path):
        cfg = write_config(tmp_path, BINARY_SIM)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("simulate", "--config", cfg, "--seed", "5", "--threads", "1", "--out", str(a))
        run_cli("simulate", "--config", cfg, "--seed", "5", "--threads", "4", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_multiple_mode_row(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "multiple", "N": 6, "M": 6, "K": 2,
                                      "T": 2, "sigma2": 0.5, "trials": 200})
        out = tmp_path / "m.csv"
        assert run_cli("simulate", "--config", cfg, "--seed", "6", "--out", str(out)).returncode == 0
        rows = read_rows(out)
        assert rows[0]["mode"] == "multiple"
        assert float(rows[0]["lambda_bar"]) > 1.0

    def test_ensemble_mode_rows(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "ensemble", "N": 6, "M": 4, "K": 1, "T": 1,
                                      "sigma2": 1.0, "trials": 1, "matrix_draws": 3,
                                      "trials_per_matrix": 50})
        out = tmp_path / "e.csv"
        assert run_cli("simulate", "--config", cfg, "--seed", "7", "--out", str(out)).returncode == 0
        rows = read_rows(out)
        assert [r["mode"] for r in rows] == ["ensemble"] + ["ensemble-matrix"] * 3


class TestEigCheckCommand:
    def test_zero_violations_and_slack_column(self, tmp_path):
        cfg = write_config(tmp_path, {"grid": {"M": [6, 8], "K": [1, 2]},
                                      "draws_per_cell": 10})
        out = tmp_path / "eig.csv"
        assert run_cli("eig-check", "--config", cfg, "--seed", "8", "--out", str(out)).returncode == 0
        text = out.read_text()
        assert text.rstrip().endswith("# violations=0")
        rows = read_rows(out)
        assert len(rows) == 10 * (1 + 2) * 2
        assert all(float(r["min_slack_lower"]) >= -1e-9 for r in rows)
        assert all(float(r["min_slack_upper"]) >= -1e-9 for r in rows)

    def test_deterministic_under_seed(self, tmp_path):
        cfg = write_config(tmp_path, {"grid": {"M": 6, "K": 2}, "draws_per_cell": 5})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("eig-check", "--config", cfg, "--seed", "9", "--out", str(a))
        run_cli("eig-check", "--config", cfg, "--seed", "9", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestDoaCommand:
    def test_threshold_row_and_grid_cardinality(self, tmp_path):
        cfg = write_config(tmp_path, {"epsilon": [0.1, 0.2], "N": [360, 720], "K": 2,
                                      "sigma2": 1.0})
        out = tmp_path / "doa.csv"
        assert run_cli("doa", "--config", cfg, "--seed", "1", "--out", str(out)).returncode == 0
        rows = read_rows(out)
        assert len(rows) == 4
        first = next(r for r in rows if r["N"] == "360" and r["epsilon"] == "0.1")
        assert float(first["relaxed"]) == pytest.approx(9.345, abs=5e-3)

    def test_log_growth_ratio(self, tmp_path):
        cfg = write_config(tmp_path, {"epsilon": 0.1, "N": [100, 200, 400], "K": 1,
                                      "sigma2": 1.0})
        out = tmp_path / "doa.csv"
        run_cli("doa", "--config", cfg, "--seed", "1", "--out", str(out))
        relaxed = [float(r["relaxed"]) for r in read_rows(out)]
        gaps = [b - a for a, b in zip(relaxed, relaxed[1:])]
        assert gaps[0] == pytest.approx(gaps[1], rel=1e-9)  # log-spaced increments


class TestSweepCommand:
    def test_grid_expansion_over_T(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "simulate",
                                      "base": {**BINARY_SIM, "T": 1},
                                      "grid": {"T": [1, 2, 4]}})
        out = tmp_path / "sweep.csv"
        assert run_cli("sweep", "--config", cfg, "--seed", "2", "--out", str(out)).returncode == 0
        rows = read_rows(out)
        assert [r["T"] for r in rows] == ["1", "2", "4"]

    def test_sweep_validates_every_point_first(self, tmp_path):
        cfg = write_config(tmp_path, {"command": "simulate",
                                      "base": {**BINARY_SIM, "T": 1},
                                      "grid": {"K": [2, 30]}})
        result = run_cli("sweep", "--config", cfg)
        assert result.returncode == 2


class TestSeedResolution:
    def test_env_var_seed(self, tmp_path):
        cfg = write_config(tmp_path, BINARY_SIM)
        result = subprocess.run(RUN + ["simulate", "--config", cfg],
                                capture_output=True, text=True,
                                env={"PATH": "/usr/bin:/bin:/usr/local/bin",
                                     "SUPREC_SEED": "123"})
        assert result.returncode == 0
        assert ",123," in result.stdout.splitlines()[1]

    def test_flag_overrides_env(self, tmp_path):
        cfg = write_config(tmp_path, BINARY_SIM)
        result = subprocess.run(RUN + ["simulate", "--config", cfg, "--seed", "77"],
                                capture_output=True, text=True,
                                env={"PATH": "/usr/bin:/bin:/usr/local/bin",
                                     "SUPREC_SEED": "123"})
        assert ",77," in result.stdout.splitlines()[1]
