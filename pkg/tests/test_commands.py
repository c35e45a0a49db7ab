"""CLI command smoke tests using typer.testing.CliRunner."""
from pathlib import Path

import yaml
from typer.testing import CliRunner

from sdlab.main import app

runner = CliRunner()
WIDE = {"COLUMNS": "200"}

COARSE = {
    "solver": {"schedule_max_exponent": 6},
    "refinement": {"levels": [16, 32, 64]},
    "output": {"plotdata": False},
}


def _scenario(tmp_path: Path, data: dict) -> Path:
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_version_flag():
    """--version prints the version string and exits 0."""
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output


def test_help_shows_all_commands():
    """--help lists every registered sub-command."""
    result = runner.invoke(app, ["--help"], env=WIDE)
    assert result.exit_code == 0
    for cmd in ["run", "scan", "list", "check", "config", "doctor"]:
        assert cmd in result.output, f"Command '{cmd}' not found in help output"


def test_list_shows_experiments():
    result = runner.invoke(app, ["list"], env=WIDE)
    assert result.exit_code == 0
    assert "manufactured_solution" in result.output
    assert "uniqueness_suite" in result.output


def test_config_show(isolated_config):
    """config show prints settings without crashing."""
    result = runner.invoke(app, ["config", "show"])
    assert result.exit_code == 0
    assert "output_root" in result.output


def test_config_init_refuses_to_overwrite(isolated_config, tmp_path):
    target = tmp_path / "template.yaml"
    assert runner.invoke(app, ["config", "init", str(target)]).exit_code == 0
    assert yaml.safe_load(target.read_text())["grid"]["kind"] == "interval"
    assert runner.invoke(app, ["config", "init", str(target)]).exit_code == 1
    assert runner.invoke(app, ["config", "init", str(target), "--force"]).exit_code == 0


def test_run_unknown_experiment_exits_2(isolated_config):
    result = runner.invoke(app, ["run", "no_such_experiment"], env=WIDE)
    assert result.exit_code == 2
    assert "Configuration error" in result.output
    assert "Unknown experiment" in result.output


def test_run_invalid_scenario_exits_2(isolated_config, tmp_path):
    path = _scenario(tmp_path, {"solver": {"bogus": 1}})
    result = runner.invoke(app, ["run", "energy_always_L1", "--config", str(path)], env=WIDE)
    assert result.exit_code == 2
    assert "Configuration error" in result.output


def test_run_solver_failure_exits_3(isolated_config, tmp_path):
    data = {**COARSE, "solver": {"schedule_max_exponent": 2, "method": "newton", "max_iters": 1}}
    path = _scenario(tmp_path, data)
    result = runner.invoke(
        app, ["run", "energy_always_L1", "--config", str(path), "--output", str(tmp_path / "o")], env=WIDE
    )
    assert result.exit_code == 3
    assert "Solver error" in result.output


def test_run_then_check(isolated_config, tmp_path):
    path = _scenario(tmp_path, COARSE)
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", "energy_always_L1", "--config", str(path), "--output", str(out)], env=WIDE)
    assert result.exit_code in (0, 1)
    assert (out / "results.csv").exists()

    checked = runner.invoke(app, ["check", str(out)], env=WIDE)
    assert checked.exit_code == result.exit_code


def test_check_empty_directory_exits_2(isolated_config, tmp_path):
    assert runner.invoke(app, ["check", str(tmp_path)]).exit_code == 2


def test_scan_requires_config():
    result = runner.invoke(app, ["scan"])
    assert result.exit_code != 0


def test_doctor_runs(isolated_config):
    result = runner.invoke(app, ["doctor"])
    assert result.exit_code in (0, 1)
    assert "sdlab doctor" in result.output


def test_run_takes_options_after_the_name(isolated_config, tmp_path):
    path = _scenario(tmp_path, COARSE)
    out = tmp_path / "profile"
    result = runner.invoke(app, ["run", "scenario_profile", "-c", str(path), "-o", str(out)], env=WIDE)
    assert result.exit_code in (0, 1), result.output
    assert "Missing argument" not in result.output
    assert (out / "results.csv").exists()


def test_run_takes_options_before_the_name(isolated_config, tmp_path):
    path = _scenario(tmp_path, COARSE)
    result = runner.invoke(app, ["run", "--config", str(path), "--output", str(tmp_path / "o"), "scenario_profile"])
    assert result.exit_code in (0, 1), result.output


def test_run_missing_scenario_file_exits_2(isolated_config, tmp_path):
    result = runner.invoke(app, ["run", "scenario_profile", "--config", str(tmp_path / "absent.yaml")], env=WIDE)
    assert result.exit_code == 2
    assert "Scenario file not found" in result.output


def test_run_zero_datum_exits_2(isolated_config, tmp_path):
    data = {**COARSE, "datum": {"name": "power_of_distance", "params": {"exponent": 0.0, "scale": 0.0}}}
    path = _scenario(tmp_path, data)
    result = runner.invoke(app, ["run", "scenario_profile", "-c", str(path), "-o", str(tmp_path / "o")], env=WIDE)
    assert result.exit_code == 2
    assert "vanishes" in result.output
