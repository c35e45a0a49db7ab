"""Exception hierarchy shared by the numerical core and the CLI."""
from __future__ import annotations


class SdlabError(Exception):
    """Base class for every error raised by sdlab."""


class ConfigError(SdlabError, ValueError):
    """Invalid scenario or settings (CLI exit code 2)."""


class UnknownExperimentError(ConfigError):
    """Requested experiment name is not registered."""


class GridError(SdlabError, ValueError):
    """Invalid grid parameters."""


class UnderResolvedStripError(GridError):
    """Boundary strip narrower than the resolution the grid supports."""


class EmptyCompactSetError(SdlabError, ValueError):
    """No node satisfies the requested interior distance."""


class NonlinearityError(SdlabError, ValueError):
    """Invalid nonlinearity parameters or envelope construction failure."""


class DatumError(SdlabError, ValueError):
    """Invalid datum parameters."""


class SolverError(SdlabError, RuntimeError):
    """Numerical failure inside a solver (CLI exit code 3)."""


class NonConvergenceError(SolverError):
    """Iteration limit reached before the requested tolerance."""
