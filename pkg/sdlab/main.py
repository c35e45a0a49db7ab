"""Main entry point for the sdlab Typer application."""
from __future__ import annotations

from typing import Optional

import typer
from rich import print as rprint

from sdlab import __version__
from sdlab.commands.check import check
from sdlab.commands.config_cmd import config_app
from sdlab.commands.doctor import doctor
from sdlab.commands.list_cmd import list_experiments
from sdlab.commands.run import run
from sdlab.commands.scan import scan

app = typer.Typer(
    name="sdlab",
    help=(
        "Numerical laboratory for singular semilinear elliptic problems.\n\n"
        "Each experiment solves a family of discrete problems, writes a CSV with a "
        "reproducibility header and judges it. Start with [bold]sdlab list[/bold]."
    ),
    rich_markup_mode="rich",
    no_args_is_help=True,
)

app.add_typer(config_app, name="config", help="View settings and write scenario templates.")

app.command("run")(run)
app.command("scan")(scan)
app.command("list")(list_experiments)
app.command("check")(check)
app.command("doctor")(doctor)


def _version_callback(value: bool) -> None:
    if value:
        rprint(f"[bold cyan]sdlab[/bold cyan] version [bold]{__version__}[/bold]")
        raise typer.Exit()


@app.callback()
def main(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-V",
        callback=_version_callback,
        is_eager=True,
        help="Show the application version and exit.",
    ),
) -> None:
    """Numerical laboratory for singular semilinear elliptic problems."""


if __name__ == "__main__":
    app()
