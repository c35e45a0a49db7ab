"""Shared plumbing for commands: settings, logging and exit codes."""
from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator

import typer
from rich import print as rprint

from sdlab.config import Settings, load_settings
from sdlab.errors import ConfigError, SdlabError, SolverError
from sdlab.log import configure_logging

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def prepare(verbose: bool = False) -> Settings:
    settings = load_settings()
    configure_logging("INFO" if verbose else settings.log_level)
    return settings


@contextmanager
def exit_on_error() -> Iterator[None]:
    """Translate sdlab errors into the documented exit codes."""
    try:
        yield
    except ConfigError as exc:
        rprint(f"[red]Configuration error:[/red] {exc}")
        raise typer.Exit(code=EXIT_CONFIG)
    except SolverError as exc:
        rprint(f"[red]Solver error:[/red] {exc}")
        raise typer.Exit(code=EXIT_SOLVER)
    except SdlabError as exc:
        # grid, datum and nonlinearity errors come from bad inputs
        rprint(f"[red]Error:[/red] {exc}")
        raise typer.Exit(code=EXIT_CONFIG)
