"""sdlab scan: evaluate an experiment over a parameter grid."""
from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

import typer

from sdlab.commands.common import EXIT_FAIL, EXIT_PASS, exit_on_error, prepare
from sdlab.config import load_scenario
from sdlab.experiments.scan import run_scan
from sdlab.ui.report import show_verdict


def scan(
    config: Path = typer.Option(..., "--config", "-c", help="Scenario YAML with a 'scan' section"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", min=1, help="Concurrent points"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log solver progress"),
) -> None:
    """Run every point of the scenario's scan and write scan.csv."""
    settings = prepare(verbose)
    if workers is not None:
        settings = settings.model_copy(update={"workers": workers})
    with exit_on_error():
        cfg = load_scenario(config)
        result = asyncio.run(run_scan(cfg, settings))
    failed = sum(1 for row in result.rows if row.get("error"))
    if failed:
        typer.echo(f"{failed} of {len(result.rows)} point(s) failed; see the error column")
    show_verdict(f"{result.experiment} (scan)", result.verdict, result.directory)
    raise typer.Exit(EXIT_PASS if result.verdict.passed else EXIT_FAIL)
