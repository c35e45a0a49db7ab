"""Run a registered experiment and persist its rows, verdict and plot data."""
from __future__ import annotations

import asyncio
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from sdlab.config import ScenarioConfig, Settings, parse_scenario
from sdlab.errors import ConfigError
from sdlab.experiments.output import (
    RESULTS_FILE,
    SCAN_FILE,
    VERDICT_FILE,
    curves_from_rows,
    emit_plotdata,
    read_results,
    read_text,
    render_csv,
    write_text,
    write_verdict,
)
from sdlab.experiments.registry import Experiment, Params, Row, Verdict, get_experiment
from sdlab.log import get_logger

logger = get_logger("runner")


@dataclass
class RunResult:
    experiment: str
    directory: Path
    rows: list[Row]
    verdict: Verdict
    params: Params


def output_directory(name: str, cfg: ScenarioConfig, settings: Settings) -> Path:
    """The scenario's explicit directory, else <output_root>/<experiment>."""
    return Path(cfg.output.directory) if cfg.output.directory else Path(settings.output_root) / name


def results_header(experiment: Experiment, cfg: ScenarioConfig, params: Params, kind: str = "run") -> dict[str, Any]:
    return {
        "experiment": experiment.name,
        "anchor": experiment.anchor,
        "kind": kind,
        "params": params,
        "scenario": cfg.model_dump(mode="json"),
    }


async def _emit_curves(directory: Path, experiment: Experiment, rows: list[Row]) -> None:
    curves = []
    for spec in experiment.curves:
        curves.extend(curves_from_rows(rows, spec.x, spec.ys, spec.group_by))
    if curves:
        await emit_plotdata(directory, curves)
    else:
        logger.info("no plottable curves for %s", experiment.name)


async def run_experiment(name: str, cfg: ScenarioConfig, settings: Settings) -> RunResult:
    """Produce rows off the event loop, then write results.csv, verdict.yaml and plot data."""
    experiment = get_experiment(name)
    params = experiment.resolve_params(cfg)
    directory = output_directory(name, cfg, settings)
    logger.info("running %s into %s", name, directory)

    rows = await asyncio.to_thread(experiment.produce, cfg, params)
    verdict = experiment.rule(rows, params, cfg)

    await write_text(directory / RESULTS_FILE, render_csv(results_header(experiment, cfg, params), rows))
    await write_verdict(directory, {"experiment": name, **verdict.to_dict()})
    if cfg.output.plotdata and settings.plotdata:
        await _emit_curves(directory, experiment, rows)
    return RunResult(name, directory, rows, verdict, params)


@dataclass
class CheckResult:
    experiment: str
    verdict: Verdict
    recorded: Optional[bool]

    @property
    def consistent(self) -> bool:
        return self.recorded is None or self.recorded == self.verdict.passed


async def check_directory(directory: Path) -> CheckResult:
    """Re-evaluate the pass rule from a results directory without solving anything."""
    directory = Path(directory)
    results, scan = directory / RESULTS_FILE, directory / SCAN_FILE
    if results.exists():
        path, kind = results, "run"
    elif scan.exists():
        path, kind = scan, "scan"
    else:
        raise ConfigError(f"No {RESULTS_FILE} or {SCAN_FILE} in {directory}")

    header, rows = await read_results(path)
    name = header.get("experiment")
    if not name:
        raise ConfigError(f"{path} has no experiment header")
    experiment = get_experiment(name)
    cfg = parse_scenario(header.get("scenario"))
    params = {**experiment.defaults, **(header.get("params") or {})}
    rule = experiment.scan_rule if kind == "scan" else experiment.rule
    if rule is None:
        raise ConfigError(f"experiment {name!r} has no scan rule")
    verdict = rule(rows, params, cfg)

    recorded = None
    verdict_path = directory / VERDICT_FILE
    if verdict_path.exists():
        stored = yaml.safe_load(await read_text(verdict_path)) or {}
        recorded = stored.get("passed")
    return CheckResult(name, verdict, recorded)
