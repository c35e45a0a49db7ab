"""sdlab run: execute one registered experiment and judge it."""
from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

import typer

from sdlab.commands.common import EXIT_FAIL, EXIT_PASS, exit_on_error, prepare
from sdlab.config import load_scenario
from sdlab.experiments.runner import run_experiment
from sdlab.ui.report import show_verdict


def run(
    name: str = typer.Argument(..., help="Experiment name (see 'sdlab list')"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario YAML file"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Override the output directory"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log solver progress"),
) -> None:
    """Run an experiment, write its artifacts and print the verdict.

    Exit code 0 means every check passed, 1 that a check failed.

    Examples:
        sdlab run manufactured_solution
        sdlab run threshold_scan_sharp --config sharp.yaml
    """
    settings = prepare(verbose)
    with exit_on_error():
        cfg = load_scenario(config)
        if output is not None:
            cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"directory": output})})
        result = asyncio.run(run_experiment(name, cfg, settings))
    show_verdict(result.experiment, result.verdict, result.directory)
    raise typer.Exit(EXIT_PASS if result.verdict.passed else EXIT_FAIL)
