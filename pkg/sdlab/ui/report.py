"""Rich rendering of experiment listings and verdicts."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from rich import print as rprint
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from sdlab.experiments.registry import Experiment, Verdict

console = Console()


def show_experiments(experiments: Sequence[Experiment]) -> None:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Experiment", style="cyan", no_wrap=True)
    table.add_column("Checks")
    table.add_column("Scan", justify="center")
    for exp in experiments:
        table.add_row(exp.name, exp.anchor, "yes" if exp.point else "")
    rprint(Panel(table, title="[bold]sdlab experiments[/bold]", border_style="blue"))


def show_verdict(name: str, verdict: Verdict, directory: Path | None = None) -> None:
    """Checks table followed by a one-line PASS/FAIL summary."""
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("#", style="dim", width=3)
    table.add_column("Check", style="cyan")
    table.add_column("Result", justify="center")
    table.add_column("Detail")
    for i, check in enumerate(verdict.checks, start=1):
        result = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(str(i), check.name, result, check.detail)
    console.print(table)

    if verdict.borderline:
        rprint(f"[yellow]Borderline (not judged):[/yellow] {', '.join(verdict.borderline)}")
    status = "[green bold]PASS[/green bold]" if verdict.passed else "[red bold]FAIL[/red bold]"
    suffix = f" [dim]({directory})[/dim]" if directory else ""
    rprint(f"{status} {name}{suffix}")
