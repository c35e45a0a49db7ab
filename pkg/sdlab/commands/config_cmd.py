"""Config commands: show runtime settings and write scenario templates."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich import print as rprint
from rich.panel import Panel
from rich.table import Table

from sdlab.commands.common import exit_on_error
from sdlab.config import ScenarioConfig, dump_scenario, get_config_path, load_scenario, load_settings

config_app = typer.Typer(help="View runtime settings and scenario files.")


@config_app.command("show")
def show(
    scenario: Optional[Path] = typer.Option(None, "--scenario", "-s", help="Scenario file to resolve (default: built-in defaults)"),
) -> None:
    """Show current settings and the resolved scenario."""
    settings = load_settings()

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Setting", style="cyan")
    table.add_column("Value")
    table.add_row("config_file", str(get_config_path()))
    table.add_row("output_root", str(settings.output_root))
    table.add_row("workers", str(settings.workers))
    table.add_row("log_level", settings.log_level)
    table.add_row("plotdata", str(settings.plotdata))

    rprint(Panel(table, title="[bold]sdlab configuration[/bold]", border_style="blue"))

    with exit_on_error():
        cfg = load_scenario(scenario)
    title = str(scenario) if scenario is not None else "default scenario"
    rprint(Panel(dump_scenario(cfg).rstrip(), title=f"[bold]{title}[/bold]", border_style="green"))


@config_app.command("init")
def init(
    path: Path = typer.Argument(Path("scenario.yaml"), help="Where to write the template"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file"),
) -> None:
    """Write a scenario file with every default spelled out."""
    if path.exists() and not force:
        rprint(f"[red]{path} already exists[/red] (use --force to overwrite)")
        raise typer.Exit(code=1)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_scenario(ScenarioConfig()), encoding="utf-8")
    rprint(f"[green]Wrote[/green] {path}")
