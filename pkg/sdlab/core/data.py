"""Data f (and mollified measures) for the singular problem L u = h(u) f."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from sdlab.core.geometry import Grid, GridKind, integrate
from sdlab.errors import DatumError

Evaluator = Callable[[Grid], np.ndarray]

_LOG_CUTOFF = math.exp(-1.0)


def _effective_distance(grid: Grid) -> np.ndarray:
    # log(1/delta) must stay >= 1 on the whole domain
    return np.minimum(grid.distance, _LOG_CUTOFF)


@dataclass(frozen=True, eq=False)
class DatumSpec:
    """A nonnegative datum given by name, parameters and a nodal evaluator."""

    name: str
    params: Mapping[str, Any]
    evaluator: Evaluator = field(repr=False)
    nonnegative: bool = True

    def values(self, grid: Grid) -> np.ndarray:
        values = np.asarray(self.evaluator(grid), dtype=float)
        if values.shape != grid.nodes.shape:
            raise DatumError(f"{self.name}: evaluator returned shape {values.shape}, expected {grid.nodes.shape}")
        if not np.all(np.isfinite(values)):
            raise DatumError(f"{self.name}: datum is not finite at every node")
        if self.nonnegative and np.any(values < 0):
            raise DatumError(f"{self.name}: datum is negative at {int(np.sum(values < 0))} nodes")
        return values

    def truncated(self, grid: Grid, n: float) -> np.ndarray:
        """T_n(f) at the nodes."""
        return np.minimum(self.values(grid), n)

    def __add__(self, other: "DatumSpec") -> "DatumSpec":
        if not isinstance(other, DatumSpec):
            return NotImplemented

        def evaluator(grid: Grid) -> np.ndarray:
            return self.values(grid) + other.values(grid)

        return DatumSpec(
            name=f"{self.name}+{other.name}",
            params={self.name: dict(self.params), other.name: dict(other.params)},
            evaluator=evaluator,
            nonnegative=self.nonnegative and other.nonnegative,
        )


def power_of_distance(exponent: float, scale: float = 1.0) -> DatumSpec:
    """f = scale * delta^exponent."""
    if scale < 0:
        raise DatumError(f"scale must be nonnegative, got {scale}")
    return DatumSpec(
        name="power_of_distance",
        params={"exponent": exponent, "scale": scale},
        evaluator=lambda grid: scale * np.power(grid.distance, exponent),
    )


def _boundary_layer_profile(grid: Grid, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """(u, -Delta u) for u = (1 - r^2)^eta; intervals use r = 2x - 1."""
    if grid.kind is GridKind.INTERVAL:
        r, dim, stretch = 2.0 * grid.nodes - 1.0, 1, 4.0
    else:
        r, dim, stretch = grid.nodes, grid.dimension, 1.0
    base = 1.0 - r**2
    u = base**eta
    minus_laplacian = 2 * eta * dim * base ** (eta - 1) - 4 * eta * (eta - 1) * r**2 * base ** (eta - 2)
    return u, stretch * minus_laplacian


def boundary_layer_solution(grid: Grid, eta: float) -> np.ndarray:
    return _boundary_layer_profile(grid, eta)[0]


def boundary_layer(eta: float, gamma: float) -> DatumSpec:
    """f = u^gamma * (-Delta u) for u = (1 - |x|^2)^eta, so u solves -Delta u = u^-gamma f."""
    if not 0 < eta <= 1:
        raise DatumError(f"eta must lie in (0, 1], got {eta}")

    def evaluator(grid: Grid) -> np.ndarray:
        u, minus_laplacian = _boundary_layer_profile(grid, eta)
        return u**gamma * minus_laplacian

    return DatumSpec(name="boundary_layer", params={"eta": eta, "gamma": gamma}, evaluator=evaluator)


def sharp_profile(m: float) -> DatumSpec:
    """f = max(1 / (delta^(1/m) log(1/delta)), 1): in L^m, in no L^q for q > m."""
    if m < 1:
        raise DatumError(f"m must be >= 1, got {m}")

    def evaluator(grid: Grid) -> np.ndarray:
        delta = _effective_distance(grid)
        return np.maximum(1.0 / (delta ** (1.0 / m) * np.log(1.0 / delta)), 1.0)

    return DatumSpec(name="sharp_profile", params={"m": m}, evaluator=evaluator)


def log_weight(gamma: float, a: float) -> DatumSpec:
    """f = 1 / (delta^(1-gamma) (-log delta)^a), the borderline Lorentz example."""
    if not 0 < gamma < 1:
        raise DatumError(f"log_weight needs gamma in (0, 1), got {gamma}")

    def evaluator(grid: Grid) -> np.ndarray:
        delta = _effective_distance(grid)
        return 1.0 / (delta ** (1.0 - gamma) * (-np.log(delta)) ** a)

    return DatumSpec(name="log_weight", params={"gamma": gamma, "a": a}, evaluator=evaluator)


def mollified_atom(location: float = 0.0, mass: float = 1.0, width: float = 0.1) -> DatumSpec:
    """Smooth bump of radius ``width`` around ``location`` with discrete integral ``mass``.

    On radial grids the atom sits at the origin.
    """
    if mass < 0 or width <= 0:
        raise DatumError("atom mass must be nonnegative and width positive")

    def evaluator(grid: Grid) -> np.ndarray:
        if grid.kind is GridKind.RADIAL_BALL:
            if location != 0.0:
                raise DatumError("radial grids only support atoms at the origin")
            rho = grid.nodes / width
        else:
            if not 0 < location < 1:
                raise DatumError(f"atom location must lie in (0, 1), got {location}")
            rho = np.abs(grid.nodes - location) / width
        inside = rho < 1.0
        bump = np.zeros_like(rho)
        bump[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
        total = integrate(grid, bump)
        if total <= 0:
            raise DatumError(f"atom of width {width:g} contains no grid node (h = {grid.h:g})")
        return mass * bump / total

    return DatumSpec(
        name="mollified_atom",
        params={"location": location, "mass": mass, "width": width},
        evaluator=evaluator,
    )


def _inverse_power_check(grid: Grid, beta: float) -> None:
    if grid.kind is not GridKind.RADIAL_BALL or grid.dimension < 3:
        raise DatumError("the inverse power construction lives on balls with N >= 3")
    if not 0 < beta < grid.dimension - 2:
        raise DatumError(f"beta must lie in (0, N - 2), got {beta}")


def inverse_power_solution(grid: Grid, beta: float) -> np.ndarray:
    _inverse_power_check(grid, beta)
    return grid.nodes ** (-beta) - 1.0


def inverse_power(beta: float = 0.55, gamma: float = 0.5) -> DatumSpec:
    """g = f * u^gamma with u = r^-beta - 1 and f = -Delta u = beta (N - 2 - beta) r^(-beta-2).

    u has infinite energy once beta >= 1/2 while g stays integrable for beta < 1/(1 + gamma).
    """

    def evaluator(grid: Grid) -> np.ndarray:
        u = inverse_power_solution(grid, beta)
        r = grid.nodes
        f = beta * (grid.dimension - 2 - beta) * r ** (-beta - 2.0)
        return f * u**gamma

    return DatumSpec(name="inverse_power", params={"beta": beta, "gamma": gamma}, evaluator=evaluator)


def table(points: Sequence[Sequence[float]]) -> DatumSpec:
    """Piecewise-linear datum in the distance variable through (delta, f) points."""
    if len(points) < 2:
        raise DatumError("a table datum needs at least two points")
    data = np.array(sorted(tuple(p) for p in points), dtype=float)

    return DatumSpec(
        name="table",
        params={"points": [list(p) for p in data.tolist()]},
        evaluator=lambda grid: np.interp(grid.distance, data[:, 0], data[:, 1]),
    )


_FACTORIES: dict[str, Callable[..., DatumSpec]] = {
    "power_of_distance": power_of_distance,
    "boundary_layer": boundary_layer,
    "sharp_profile": sharp_profile,
    "log_weight": log_weight,
    "mollified_atom": mollified_atom,
    "inverse_power": inverse_power,
    "table": table,
}


def datum_from_config(name: str, params: Mapping[str, Any] | None = None) -> DatumSpec:
    factory = _FACTORIES.get(name)
    if factory is None:
        raise DatumError(f"Unknown datum: {name!r}")
    try:
        return factory(**dict(params or {}))
    except TypeError as exc:
        raise DatumError(f"Invalid parameters for datum {name!r}: {exc}") from exc
