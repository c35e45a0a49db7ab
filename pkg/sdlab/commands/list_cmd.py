"""sdlab list: show the registered experiments."""
from __future__ import annotations

from sdlab.experiments.registry import all_experiments
from sdlab.ui.report import show_experiments


def list_experiments() -> None:
    """List experiments with the statement each one checks."""
    show_experiments(all_experiments())
