"""Doctor command: check the numerical stack and the output location."""
from __future__ import annotations

import sys
import tempfile
from importlib import metadata
from pathlib import Path

import typer
from rich.console import Console
from rich.panel import Panel

from sdlab.config import get_config_path, load_settings
from sdlab.experiments.registry import all_experiments

_REQUIRED = ("numpy", "scipy", "pydantic-settings", "typer", "rich", "aiofiles", "PyYAML")


def _get_console() -> Console:
    return Console()


def _ok(con: Console, label: str) -> None:
    con.print(f"  [green]OK[/green]  {label}")


def _fail(con: Console, label: str, reason: str) -> None:
    con.print(f"  [red]FAIL[/red] {label}[dim]: {reason}[/dim]")


def _writable(directory: Path) -> bool:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory):
            pass
    except OSError:
        return False
    return True


def doctor() -> None:
    """Run a series of environment health checks for sdlab."""
    con = _get_console()
    con.print(Panel("[bold]sdlab doctor[/bold]", border_style="blue", expand=False))
    con.print()

    failed = False

    major, minor = sys.version_info.major, sys.version_info.minor
    if (major, minor) >= (3, 11):
        _ok(con, f"Python version ({major}.{minor}) >= 3.11")
    else:
        _fail(con, f"Python version ({major}.{minor})", "requires Python >= 3.11")
        failed = True

    for package in _REQUIRED:
        try:
            _ok(con, f"{package} {metadata.version(package)}")
        except metadata.PackageNotFoundError:
            _fail(con, package, "not installed")
            failed = True

    config_path = get_config_path()
    if config_path.exists():
        _ok(con, f"Config file found ({config_path})")
    else:
        con.print(f"  [dim]--  no config file at {config_path}; defaults apply[/dim]")

    settings = load_settings()
    if _writable(Path(settings.output_root)):
        _ok(con, f"Output root writable ({settings.output_root})")
    else:
        _fail(con, "Output root", f"{settings.output_root} is not writable")
        failed = True

    try:
        experiments = all_experiments()
        _ok(con, f"{len(experiments)} experiment(s) registered")
    except Exception as exc:
        _fail(con, "Experiment registry", str(exc))
        failed = True

    con.print()
    if failed:
        con.print("[red bold]Some checks failed.[/red bold] See above for details.")
        raise typer.Exit(code=1)
    con.print("[green bold]All checks passed![/green bold] sdlab is ready to use.")
