"""Logging setup: stdlib loggers rendered on stderr through rich."""
from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

_ROOT = "sdlab"
_configured = False


def configure_logging(level: str = "WARNING") -> None:
    """Attach a single RichHandler to the package logger."""
    global _configured
    root = logging.getLogger(_ROOT)
    root.setLevel(level.upper())
    if not _configured:
        handler = RichHandler(
            console=Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
            markup=False,
        )
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        root.propagate = False
        _configured = True


def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger (``sdlab.<name>``)."""
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
