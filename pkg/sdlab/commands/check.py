"""sdlab check: re-judge a results directory offline."""
from __future__ import annotations

import asyncio
from pathlib import Path

import typer
from rich import print as rprint

from sdlab.commands.common import EXIT_FAIL, EXIT_PASS, exit_on_error, prepare
from sdlab.experiments.runner import check_directory
from sdlab.ui.report import show_verdict


def check(
    directory: Path = typer.Argument(..., help="Directory holding results.csv or scan.csv"),
) -> None:
    """Recompute the verdict from stored rows without solving anything."""
    prepare()
    with exit_on_error():
        result = asyncio.run(check_directory(directory))
    show_verdict(result.experiment, result.verdict, directory)
    if not result.consistent:
        rprint(f"[yellow]Stored verdict ({result.recorded}) differs from the recomputed one.[/yellow]")
    raise typer.Exit(EXIT_PASS if result.verdict.passed and result.consistent else EXIT_FAIL)
