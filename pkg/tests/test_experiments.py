"""Tests for the experiment registry, pass rules and artifacts."""
from __future__ import annotations

import math

import pytest
import yaml

from sdlab.config import ScenarioConfig, Settings
from sdlab.errors import ConfigError, UnknownExperimentError
from sdlab.experiments.output import (
    MANIFEST_FILE,
    PLOT_DIR,
    RESULTS_FILE,
    SCAN_FILE,
    VERDICT_FILE,
    Curve,
    curves_from_rows,
    emit_plotdata,
    parse_csv,
    render_csv,
)
from sdlab.experiments.registry import all_experiments, get_experiment
from sdlab.experiments.runner import check_directory, run_experiment
from sdlab.experiments.scan import run_scan, scan_points
from sdlab.experiments.scenarios import aitken

EXPECTED = {
    "manufactured_solution",
    "threshold_scan_sharp",
    "threshold_scan_34",
    "energy_always_L1",
    "strong_singularity_counterexample",
    "L1_lower_order",
    "weighted_bound",
    "boundary_bd",
    "concentration",
    "uniqueness_suite",
    "energy_criterion",
    "scenario_profile",
}

HS = [1 / 128, 1 / 256, 1 / 512, 1 / 1024]


def _levels(values, **extra):
    return [{"level": int(round(1 / h)), "h": h, "converged": True, **extra, **v} for h, v in zip(HS, values)]


def _judge(name, rows, **params):
    exp = get_experiment(name)
    cfg = ScenarioConfig()
    return exp.rule(rows, {**exp.defaults, **params}, cfg)


def _checks(verdict):
    return {c.name: c.passed for c in verdict.checks}


def _sharp_rows(case, energies, borderline=False, **extra):
    return _levels(
        [{"energy": e, "truncation_energy_pow": 1.0 - h**0.5, "gk_n_ratio": 1.0} for h, e in zip(HS, energies)],
        case=case,
        borderline=borderline,
        **extra,
    )


def _strong_rows(f_lq_exact=12.5):
    return _levels(
        [
            {
                "energy": h**-0.1,
                "g_l1": 3.0 - h**0.3,
                "f_lq": 12.5 - h**0.4,
                "truncation_energy_pow": 2.0 - h**0.5,
                "gk_l1": 1.5 - h**0.5,
                "gk_n_ratio": 1.0,
            }
            for h in HS
        ],
        case="inverse_power",
        f_lq_exact=f_lq_exact,
    )


def _profile_rows():
    return _levels(
        [{"energy": 1.0, "non_cauchy": False, "envelopes_hold": True, "barrier_constant": 0.3} for _ in HS],
        case="model_power/power_of_distance",
    )


class TestRegistry:
    def test_all_experiments_registered(self):
        assert {e.name for e in all_experiments()} == EXPECTED

    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError):
            get_experiment("does_not_exist")

    def test_params_override_defaults(self):
        cfg = ScenarioConfig.model_validate({"params": {"eta": 0.6}})
        params = get_experiment("manufactured_solution").resolve_params(cfg)
        assert params["eta"] == 0.6
        assert params["gamma"] == 1.0

    def test_anchors_present(self):
        assert all(e.anchor for e in all_experiments())


class TestRules:
    def test_mild_energy_bounded_passes(self):
        rows = _levels([{"energy": 1.0 - h**0.5} for h in HS], case="mild")
        assert _judge("energy_always_L1", rows).passed

    def test_mild_energy_divergent_fails(self):
        rows = _levels([{"energy": h**-0.3} for h in HS], case="mild")
        assert not _judge("energy_always_L1", rows).passed

    def test_unconverged_rows_fail(self):
        rows = _levels([{"energy": 1.0 - h**0.5} for h in HS], case="mild")
        rows[-1]["converged"] = False
        assert not _judge("energy_always_L1", rows).passed

    def test_strong_singularity(self):
        rows = _strong_rows()
        verdict = _judge("strong_singularity_counterexample", rows)
        assert verdict.passed, verdict.checks
        assert len(verdict.checks) == 7

    def test_strong_singularity_needs_f_in_lq(self):
        rows = _strong_rows(f_lq_exact=math.inf)
        checks = _checks(_judge("strong_singularity_counterexample", rows))
        assert not checks["f in L^q"]

    def test_strong_singularity_rejects_growing_f_norm(self):
        rows = _strong_rows()
        for row, h in zip(rows, HS):
            row["f_lq"] = h**-0.4
        checks = _checks(_judge("strong_singularity_counterexample", rows))
        assert not checks["f in L^q"]

    def test_strong_singularity_rejects_growing_gk_gradient(self):
        rows = _strong_rows()
        for row, h in zip(rows, HS):
            row["gk_l1"] = h**-0.3
        checks = _checks(_judge("strong_singularity_counterexample", rows))
        assert not checks["gradient of G_k(u) integrable"]
        assert checks["f in L^q"]

    def test_strong_singularity_rejects_unbounded_truncated_power(self):
        rows = _strong_rows()
        for row, h in zip(rows, HS):
            row["truncation_energy_pow"] = h**-0.2
        assert not _judge("strong_singularity_counterexample", rows).passed

    def test_manufactured_rule(self):
        rows = _levels(
            [{"max_rel_error": 0.5 * h, "energy": 1.0, "bd_exponent": 0.79} for h in HS], case="boundary_layer"
        )
        verdict = _judge("manufactured_solution", rows, eta=0.8)
        assert verdict.passed, verdict.checks

    @pytest.mark.parametrize("eta,order,passed", [(0.5, 0.45, True), (0.8, 0.6, False), (1.0, 0.95, True)])
    def test_manufactured_order_threshold_follows_eta(self, eta, order, passed):
        rows = _levels(
            [{"max_rel_error": 1e-3 * (h * 1024) ** order, "energy": 1.0, "bd_exponent": eta} for h in HS],
            case="boundary_layer",
        )
        checks = _checks(_judge("manufactured_solution", rows, eta=eta))
        assert checks["fitted order"] is passed

    def test_manufactured_order_threshold_override(self):
        rows = _levels(
            [{"max_rel_error": 1e-3 * (h * 1024) ** 0.6, "energy": 1.0, "bd_exponent": 0.8} for h in HS],
            case="boundary_layer",
        )
        assert _checks(_judge("manufactured_solution", rows, eta=0.8, min_order=0.5))["fitted order"]

    def test_manufactured_rule_rejects_wrong_trace(self):
        rows = _levels(
            [{"max_rel_error": 0.5 * h, "energy": 1.0, "bd_exponent": 0.5} for h in HS], case="boundary_layer"
        )
        assert not _judge("manufactured_solution", rows, eta=0.8).passed

    def test_sharp_rule_skips_borderline(self):
        rows = _sharp_rows("a", [2.0 - h**0.2 for h in HS], oracle="bounded", predicted_exponent=0.1) + _sharp_rows(
            "b", [h**-0.5 for h in HS], oracle="bounded", predicted_exponent=0.1, borderline=True
        )
        verdict = _judge("threshold_scan_sharp", rows)
        assert verdict.passed, verdict.checks
        assert verdict.borderline == ("b",)

    def test_sharp_rule_checks_divergence_rate(self):
        rows = _sharp_rows("a", [h**-0.5 for h in HS], oracle="divergent", predicted_exponent=-0.1)
        assert not _judge("threshold_scan_sharp", rows).passed

    def test_sharp_rule_needs_bounded_truncated_power(self):
        rows = _sharp_rows("a", [2.0 - h**0.2 for h in HS], oracle="bounded", predicted_exponent=0.1)
        for row, h in zip(rows, HS):
            row["truncation_energy_pow"] = h**-0.3
        checks = _checks(_judge("threshold_scan_sharp", rows))
        assert not checks["energy of T_k(u)^((gamma+1)/2) bounded in every case"]

    def test_sharp_rule_needs_settled_gk(self):
        rows = _sharp_rows("a", [2.0 - h**0.2 for h in HS], oracle="bounded", predicted_exponent=0.1)
        rows[-1]["gk_n_ratio"] = 1.5
        checks = _checks(_judge("threshold_scan_sharp", rows))
        assert not checks["G_k gradient norm settles in n"]

    def test_sharp_rule_ignores_missing_gk_ratio(self):
        rows = _sharp_rows("a", [2.0 - h**0.2 for h in HS], oracle="bounded", predicted_exponent=0.1)
        for row in rows:
            row["gk_n_ratio"] = math.nan
        assert _judge("threshold_scan_sharp", rows).passed

    def test_concentration_defaults_use_bounded_h(self):
        assert get_experiment("concentration").defaults["cap"] == 1.0

    def test_scenario_profile_rule(self):
        rows = _profile_rows()
        verdict = _judge("scenario_profile", rows)
        assert verdict.passed, verdict.checks

    @pytest.mark.parametrize(
        "column,value,check",
        [
            ("non_cauchy", True, "continuation increments settle in n"),
            ("envelopes_hold", False, "envelopes bracket h on the range of u"),
            ("barrier_constant", 0.0, "lower barrier grows linearly off the boundary"),
            ("converged", False, "all solves converged"),
        ],
    )
    def test_scenario_profile_rule_failures(self, column, value, check):
        rows = _profile_rows()
        rows[1][column] = value
        checks = _checks(_judge("scenario_profile", rows))
        assert not checks[check]

    def test_weighted_bound(self):
        rows = _levels(
            [{"operator_l1": h**-0.4, "operator_l1_delta": 5.0 - h} for h in HS], case="boundary_layer", predicted_exponent=-0.4
        )
        assert _judge("weighted_bound", rows).passed

    def test_boundary_rule_recomputes_exponent(self):
        eps = [0.1, 0.05, 0.025, 0.0125]
        rows = [{"case": "boundary_layer_0.8", "eps": e, "indicator": e**0.8, "expected_exponent": 0.8} for e in eps]
        rows += [{"case": "flat", "eps": e, "indicator": 1.0, "expected_exponent": math.nan} for e in eps]
        checks = {c.name.split(":")[0]: c.passed for c in _judge("boundary_bd", rows).checks}
        assert checks == {"boundary_layer_0.8": True, "flat": False}

    def test_concentration_rule_uses_extrapolation(self):
        target = 0.5 / (4 * math.pi)
        rows = [
            {"case": "c_inf=0.5", "width": w, "coefficient": target * (1 - 0.5 * w * 10), "target": target, "converged": True}
            for w in (0.1, 0.05, 0.025)
        ]
        assert _judge("concentration", rows).passed

    def test_uniqueness_rule(self):
        rows = [
            {"case": "gamma=1,constant", "pair": "truncation-shift", "sup_distance": 1e-9, "bracket_gap": 1e-9},
            {"case": "gamma=2,constant", "pair": "truncation-shift", "sup_distance": 1e-3, "bracket_gap": 1e-9},
        ]
        verdict = _judge("uniqueness_suite", rows)
        assert [c.passed for c in verdict.checks] == [True, False]

    def test_empty_rows_never_pass(self):
        assert not _judge("uniqueness_suite", []).passed


class TestAitken:
    def test_geometric_sequence_limit(self):
        assert aitken([1.5, 1.25, 1.125]) == pytest.approx(1.0)

    def test_alternating_divergence_falls_back(self):
        assert aitken([1.0, 3.0, 0.0]) == 0.0

    def test_short_sequence(self):
        assert aitken([2.0, 1.0]) == 1.0


class TestCsv:
    def test_header_and_rows_survive(self):
        header = {"experiment": "x", "params": {"eta": 0.8}}
        rows = [{"a": 0.1, "b": True, "c": "text"}, {"a": 2.0, "d": None}]
        parsed_header, parsed = parse_csv(render_csv(header, rows))
        assert parsed_header == header
        assert parsed[0] == {"a": "0.1", "b": "1", "c": "text", "d": ""}
        assert parsed[1]["d"] == ""

    def test_floats_keep_full_precision(self):
        _, parsed = parse_csv(render_csv({}, [{"x": 1 / 3}]))
        assert float(parsed[0]["x"]) == 1 / 3

    def test_curves_grouped(self):
        rows = [{"h": 1, "e": 2, "case": "a"}, {"h": 2, "e": 3, "case": "b"}, {"h": 3, "e": "n/a", "case": "b"}]
        curves = curves_from_rows(rows, "h", ["e"], "case")
        assert [c.name for c in curves] == ["e_vs_h_a", "e_vs_h_b"]
        assert curves[1].xs == (2.0,)


class TestPlotData:
    async def test_files_and_manifest(self, tmp_path):
        paths = await emit_plotdata(tmp_path, [Curve("e vs h", "h", "e", (1.0, 2.0), (3.0, 4.0))])
        assert (tmp_path / PLOT_DIR / "e_vs_h.dat").read_text().splitlines()[1] == "1.0 3.0"
        manifest = yaml.safe_load((tmp_path / PLOT_DIR / MANIFEST_FILE).read_text())
        assert manifest["curves"][0]["points"] == 2
        assert len(paths) == 2

    async def test_empty_input_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            await emit_plotdata(tmp_path, [])


class TestRunner:
    async def test_run_writes_artifacts_and_check_agrees(self, coarse_scenario, tmp_path):
        settings = Settings(output_root=tmp_path / "root")
        result = await run_experiment("energy_always_L1", coarse_scenario, settings)
        directory = tmp_path / "out"
        assert result.directory == directory
        assert (directory / RESULTS_FILE).exists()
        assert (directory / PLOT_DIR / MANIFEST_FILE).exists()
        stored = yaml.safe_load((directory / VERDICT_FILE).read_text())
        assert stored["passed"] == result.verdict.passed

        header, rows = parse_csv((directory / RESULTS_FILE).read_text())
        assert header["experiment"] == "energy_always_L1"
        assert header["scenario"]["refinement"]["levels"] == [16, 32, 64]
        assert len(rows) == 3

        checked = await check_directory(directory)
        assert checked.consistent
        assert checked.verdict.passed == result.verdict.passed

    async def test_default_directory_under_output_root(self, tmp_path):
        cfg = ScenarioConfig.model_validate(
            {"solver": {"schedule_max_exponent": 6}, "refinement": {"levels": [16, 32, 64]}, "output": {"plotdata": False}}
        )
        result = await run_experiment("energy_always_L1", cfg, Settings(output_root=tmp_path))
        assert result.directory == tmp_path / "energy_always_L1"
        assert not (result.directory / PLOT_DIR).exists()

    async def test_check_requires_results(self, tmp_path):
        with pytest.raises(ConfigError):
            await check_directory(tmp_path)


class TestScan:
    def test_points_are_a_product(self):
        points = scan_points({"gamma": [0.5, 1.0], "max_exponent": [4, 8]})
        assert points == [
            {"gamma": 0.5, "max_exponent": 4},
            {"gamma": 0.5, "max_exponent": 8},
            {"gamma": 1.0, "max_exponent": 4},
            {"gamma": 1.0, "max_exponent": 8},
        ]

    def test_empty_parameter_rejected(self):
        with pytest.raises(ConfigError):
            scan_points({"gamma": []})

    async def test_scan_writes_rows_in_point_order(self, tmp_path):
        cfg = ScenarioConfig.model_validate(
            {
                "grid": {"num_cells": 31},
                "output": {"directory": str(tmp_path)},
                "scan": {"experiment": "uniqueness_suite", "parameters": {"gamma": [0.5, 1.0], "max_exponent": [4, 8]}},
            }
        )
        result = await run_scan(cfg, Settings(output_root=tmp_path, workers=2))
        header, rows = parse_csv((tmp_path / SCAN_FILE).read_text())
        assert header["kind"] == "scan"
        assert [int(r["index"]) for r in rows] == [0, 1, 2, 3]
        assert all(r["error"] == "" for r in rows)
        assert result.verdict.passed

    async def test_scan_needs_point_support(self, tmp_path):
        cfg = ScenarioConfig.model_validate(
            {"scan": {"experiment": "energy_always_L1", "parameters": {"gamma": [0.5]}}}
        )
        with pytest.raises(ConfigError):
            await run_scan(cfg, Settings(output_root=tmp_path))
