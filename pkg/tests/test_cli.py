"""Tests for the harness command-line interface.

Tests cover:
- Exit codes for success, configuration errors, data errors
- Output files of the scenario, simulate and thresholds commands
- Byte-identical data files across reruns with the same seed
- Overrides from the command line
"""

import json

import pytest

from tests.conftest import make_scenario_config, write_lines


@pytest.fixture
def scenario_json(tmp_path):
    path = tmp_path / "unit.json"
    path.write_text(json.dumps(make_scenario_config(n_paths=2)), encoding="utf-8")
    return path


def run(*argv) -> int:
    from harness.cli import run_cli

    return run_cli([str(a) for a in argv])


# ═══════════════════════════════════════════════════════════════════════════════
# Commands
# ═══════════════════════════════════════════════════════════════════════════════


class TestCommands:
    """Tests for each command's outputs."""

    def test_selftest(self, tmp_path, capsys):
        assert run("selftest", "--cases", 5, "--out-dir", tmp_path) == 0
        assert "Selftest Summary" in capsys.readouterr().out

    def test_scenario_writes_table_and_metadata(self, tmp_path, scenario_json):
        from harness.io import read_table

        out = tmp_path / "out"
        assert run("scenario", "--config", scenario_json, "--out-dir", out, "--workers", 1, "--no-progress") == 0
        table = read_table(out / "unit.csv")
        assert len(table) == 2
        assert (out / "unit.csv").read_text(encoding="utf-8").startswith("# schema=1 config_hash=")
        meta = json.loads((out / "unit.meta.json").read_text(encoding="utf-8"))
        assert meta["command"] == "scenario"
        assert meta["seed"] == 7
        assert meta["config"]["n_paths"] == 2
        assert "numpy" in meta["versions"]

    def test_scenario_rerun_is_byte_identical(self, tmp_path, scenario_json):
        args = ("--config", scenario_json, "--workers", 1, "--no-progress")
        assert run("scenario", *args, "--out-dir", tmp_path / "a") == 0
        assert run("scenario", *args, "--out-dir", tmp_path / "b") == 0
        assert (tmp_path / "a" / "unit.csv").read_bytes() == (tmp_path / "b" / "unit.csv").read_bytes()

    def test_overrides_and_json_format(self, tmp_path, scenario_json):
        out = tmp_path / "out"
        code = run(
            "scenario", "--config", scenario_json, "--out-dir", out, "--workers", 1,
            "--no-progress", "--paths", 3, "--seed", 11, "--format", "json",
        )
        assert code == 0
        payload = json.loads((out / "unit.json").read_text(encoding="utf-8"))
        assert len(payload["rows"]) == 2
        assert payload["rows"][0]["n_paths"] == 3
        meta = json.loads((out / "unit.meta.json").read_text(encoding="utf-8"))
        assert meta["seed"] == 11

    def test_sweep(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(
            json.dumps(make_scenario_config(name="unit_sweep", n_paths=2, tuning_mode="fixed", kappas=[2.0])),
            encoding="utf-8",
        )
        assert run("sweep", "--config", path, "--out-dir", tmp_path, "--workers", 1, "--no-progress") == 0
        from harness.io import read_table

        assert "closed_form_rel_bias" in read_table(tmp_path / "unit_sweep.csv").columns

    def test_leverage(self, tmp_path, scenario_json, capsys):
        from harness.io import read_table

        out = tmp_path / "out"
        assert run("leverage", "--config", scenario_json, "--out-dir", out, "--workers", 1, "--no-progress") == 0
        table = read_table(out / "unit_leverage.csv")
        assert list(table.columns) == [
            "delta_seconds", "big_delta_seconds", "kappa", "rel_bias", "rel_bias_rho0", "diff_in_se",
        ]
        assert len(table) == 2
        meta = json.loads((out / "unit_leverage.meta.json").read_text(encoding="utf-8"))
        assert meta["command"] == "leverage"
        assert meta["config"]["param_set"]["rho"] == -0.2
        assert "Leverage Summary" in capsys.readouterr().out

    def test_simulate(self, tmp_path):
        from harness.io import read_table

        path = tmp_path / "sim.json"
        path.write_text(json.dumps(make_scenario_config(name="sim", n_paths=1, days=1)), encoding="utf-8")
        assert run("simulate", "--config", path, "--out-dir", tmp_path) == 0
        frame = read_table(tmp_path / "sim_paths.csv")
        assert list(frame.columns) == ["path", "t_years", "nu", "log_price"]
        # four warm-up days plus one estimation day of 1-minute points
        assert len(frame) == 5 * 360 + 1
        assert frame["log_price"].iloc[0] == 0.0

    def test_thresholds(self, tmp_path):
        from harness.io import read_table

        assert run("thresholds", "--out-dir", tmp_path) == 0
        assert len(read_table(tmp_path / "thresholds_curves.csv")) > 0
        assert set(read_table(tmp_path / "thresholds_overlap.csv")["param_set"]) == {"set1", "set2", "set3"}

    def test_empirical(self, tmp_path):
        from harness.io import emit_csv, read_table, series_from_path
        from psrv_lab.sde import CklsParams, PathGrid, path_seed, simulate_ckls

        _, prices = simulate_ckls(
            CklsParams(alpha=0.2, theta=5.0, gamma=0.5, nu0=0.2), PathGrid.seconds(60.0, 3 * 360), path_seed(1, 0)
        )
        price_file = emit_csv(series_from_path(prices, 360, 60.0), tmp_path / "prices.csv")
        config = tmp_path / "emp.json"
        config.write_text(
            json.dumps({"name": "emp", "kappa_mode": "fixed", "kappa": 0.5, "grid_multiples": [5]}), encoding="utf-8"
        )
        assert run("empirical", "--prices", price_file, "--config", config, "--out-dir", tmp_path) == 0
        frame = read_table(tmp_path / "emp.csv")
        assert len(frame) == 3
        assert frame["skipped"].tolist() == [True, False, False]


# ═══════════════════════════════════════════════════════════════════════════════
# Exit codes
# ═══════════════════════════════════════════════════════════════════════════════


class TestExitCodes:
    """Configuration and data errors map to their exit codes."""

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(make_scenario_config(n_paths=0)), encoding="utf-8")
        assert run("scenario", "--config", path, "--out-dir", tmp_path) == 2

    def test_missing_config(self, tmp_path):
        assert run("scenario", "--config", tmp_path / "absent.json", "--out-dir", tmp_path) == 2

    def test_wrong_preset_kind(self, tmp_path):
        assert run("thresholds", "--config", "set1_scenario1", "--out-dir", tmp_path) == 2

    def test_bad_prices(self, tmp_path):
        prices = write_lines(
            tmp_path / "prices.csv",
            ["timestamp,price", "2024-01-02T09:30:00,100", "2024-01-02T09:31:00,oops"],
        )
        assert run("empirical", "--prices", prices, "--out-dir", tmp_path) == 3

    def test_config_is_required(self):
        with pytest.raises(SystemExit):
            run("scenario")
