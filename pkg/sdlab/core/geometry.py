"""Uniform grids on (0,1) and on the radial coordinate of the unit ball.

Interval grids are vertex centred: ``num_cells`` interior nodes x_i = i*h with
h = 1/(num_cells + 1); the Dirichlet nodes 0 and 1 are implicit.

Radial grids are cell centred: ``num_cells`` control volumes [(i-1)h, ih] with
h = 1/num_cells and nodes at their midpoints r_i = (i - 1/2)h. The face r = 0
carries no flux (its surface measure vanishes), which imposes u'(0) = 0 without
a special stencil; the Dirichlet value sits on the face r = 1, half a cell away
from the last node.

Quadrature weights of a radial grid are exact shell volumes including the
surface factor |S^{N-1}|, so summing the constant 1 returns |B_1| exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gamma as gamma_fn

from sdlab.errors import GridError, UnderResolvedStripError

MIN_CELLS = 4
STRIP_RESOLUTION = 4.0


class GridKind(str, Enum):
    INTERVAL = "interval"
    RADIAL_BALL = "radial_ball"


def ball_volume(dimension: int) -> float:
    """Lebesgue measure of the unit ball in R^N."""
    return math.pi ** (dimension / 2) / float(gamma_fn(dimension / 2 + 1))


def sphere_area(dimension: int) -> float:
    """Surface measure |S^{N-1}| of the unit sphere in R^N."""
    return dimension * ball_volume(dimension)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable discretization of the domain.

    Faces carry the fluxes: face j joins node ``j - offset`` to node
    ``j - offset + 1`` where missing neighbours are Dirichlet zeros.
    """

    kind: GridKind
    dimension: int
    num_cells: int
    h: float
    nodes: np.ndarray
    weights: np.ndarray
    distance: np.ndarray
    face_coords: np.ndarray
    face_spacing: np.ndarray
    face_measure: np.ndarray
    left_dirichlet: bool = field(default=False)

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def domain_measure(self) -> float:
        return 1.0 if self.kind is GridKind.INTERVAL else ball_volume(self.dimension)

    def pad(self, u: np.ndarray) -> np.ndarray:
        """Append the homogeneous Dirichlet values to nodal data."""
        u = np.asarray(u, dtype=float)
        if self.left_dirichlet:
            return np.concatenate(([0.0], u, [0.0]))
        return np.concatenate((u, [0.0]))

    def face_gradient(self, u: np.ndarray) -> np.ndarray:
        """Difference quotients of nodal data across every face."""
        return np.diff(self.pad(u)) / self.face_spacing

    def face_values(self, u: np.ndarray) -> np.ndarray:
        """Arithmetic means of the two values adjacent to every face."""
        padded = self.pad(u)
        return 0.5 * (padded[1:] + padded[:-1])

    @property
    def face_weights(self) -> np.ndarray:
        """Quadrature weights for face-centred integrands such as |u'|^2."""
        return self.face_measure * self.face_spacing


def build_grid(kind: GridKind | str, dimension: int, num_cells: int) -> Grid:
    """Build a uniform grid; ``dimension`` must be 1 exactly for interval grids."""
    try:
        kind = GridKind(kind)
    except ValueError as exc:
        raise GridError(f"Unknown grid kind: {kind!r}") from exc
    if num_cells < MIN_CELLS:
        raise GridError(f"num_cells must be >= {MIN_CELLS}, got {num_cells}")
    if kind is GridKind.INTERVAL and dimension != 1:
        raise GridError("interval grids are one-dimensional (N = 1)")
    if kind is GridKind.RADIAL_BALL and dimension < 2:
        raise GridError("radial ball grids need N >= 2")

    if kind is GridKind.INTERVAL:
        h = 1.0 / (num_cells + 1)
        nodes = h * np.arange(1, num_cells + 1)
        weights = np.full(num_cells, h)
        distance = np.minimum(nodes, 1.0 - nodes)
        face_coords = h * (np.arange(num_cells + 1) + 0.5)
        face_spacing = np.full(num_cells + 1, h)
        face_measure = np.ones(num_cells + 1)
        left = True
    else:
        h = 1.0 / num_cells
        edges = h * np.arange(num_cells + 1)
        edges[-1] = 1.0
        nodes = 0.5 * (edges[1:] + edges[:-1])
        area = sphere_area(dimension)
        weights = area * np.diff(edges**dimension) / dimension
        distance = 1.0 - nodes
        face_coords = edges[1:]
        face_spacing = np.full(num_cells, h)
        face_spacing[-1] = 0.5 * h
        face_measure = area * face_coords ** (dimension - 1)
        left = False

    return Grid(
        kind=kind,
        dimension=dimension,
        num_cells=num_cells,
        h=h,
        nodes=_frozen(nodes),
        weights=_frozen(weights),
        distance=_frozen(distance),
        face_coords=_frozen(face_coords),
        face_spacing=_frozen(face_spacing),
        face_measure=_frozen(face_measure),
        left_dirichlet=left,
    )


def grid_for_level(kind: GridKind | str, dimension: int, level: int) -> Grid:
    """Grid with mesh width exactly 1/level, so that dyadic levels halve h."""
    kind = GridKind(kind)
    num_cells = level - 1 if kind is GridKind.INTERVAL else level
    return build_grid(kind, dimension, num_cells)


def integrate(grid: Grid, values: np.ndarray | float) -> float:
    """Quadrature approximation of the integral of nodal data over the domain."""
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.weights.shape)
    return float(grid.weights @ values)


@dataclass(frozen=True, eq=False)
class BoundaryStrip:
    eps: float
    node_mask: np.ndarray


def boundary_strip(grid: Grid, eps: float) -> BoundaryStrip:
    """Nodes with distance to the boundary strictly below ``eps``."""
    if not 0 < eps < 0.5:
        raise GridError(f"strip width must lie in (0, 1/2), got {eps}")
    if eps < STRIP_RESOLUTION * grid.h:
        raise UnderResolvedStripError(
            f"strip width {eps:g} is below {STRIP_RESOLUTION:g} mesh widths (h = {grid.h:g})"
        )
    mask = grid.distance < eps
    mask.setflags(write=False)
    return BoundaryStrip(eps=eps, node_mask=mask)


def boundary_strip_integral(grid: Grid, values: np.ndarray, eps: float) -> float:
    """(1/eps) times the integral of ``values`` over the strip {delta < eps}."""
    strip = boundary_strip(grid, eps)
    values = np.asarray(values, dtype=float)
    return float(grid.weights[strip.node_mask] @ values[strip.node_mask]) / eps
