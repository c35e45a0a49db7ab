"""Quantities constrained by the regularity theory: energies, norms, traces, growth verdicts."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from sdlab.core.data import DatumSpec
from sdlab.core.elliptic import CoefficientField, DiscreteOperator
from sdlab.core.geometry import Grid, GridKind, boundary_strip_integral, grid_for_level, integrate
from sdlab.core.nonlinearity import ScalarNonlinearity, truncate_G, truncate_T
from sdlab.errors import GridError

BOUNDED = "bounded"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


def _face_coefficient(grid: Grid, coefficient: Optional[CoefficientField]) -> np.ndarray | float:
    return 1.0 if coefficient is None else coefficient.face_values


def energy(grid: Grid, coefficient: Optional[CoefficientField], u: np.ndarray) -> float:
    """Midpoint-gradient quadrature of the integral of a |u'|^2 (radial weight included)."""
    grad = grid.face_gradient(u)
    return float(np.sum(grid.face_weights * _face_coefficient(grid, coefficient) * grad**2))


def truncation_energy(
    grid: Grid, coefficient: Optional[CoefficientField], u: np.ndarray, k: float, gamma: float
) -> tuple[float, float]:
    """Energies of T_k(u) and of T_k(u)^((gamma+1)/2)."""
    truncated = truncate_T(k, np.maximum(np.asarray(u, dtype=float), 0.0))
    return (
        energy(grid, coefficient, truncated),
        energy(grid, coefficient, np.power(truncated, 0.5 * (gamma + 1.0))),
    )


def gk_seminorm(grid: Grid, u: np.ndarray, k: float, q: float = 1.0) -> float:
    """(integral of |grad G_k(u)|^q)^(1/q)."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    grad = np.abs(grid.face_gradient(truncate_G(k, np.asarray(u, dtype=float))))
    return float(np.sum(grid.face_weights * grad**q) ** (1.0 / q))


def gk_exponent(dimension: int) -> float:
    """A q in (1, N/(N-1)); any q >= 1 is admissible when N = 1."""
    if dimension == 1:
        return 2.0
    return 0.5 * (1.0 + dimension / (dimension - 1.0))


@dataclass(frozen=True)
class GrowthVerdict:
    verdict: str
    exponent: float
    ratios: tuple[float, ...]

    @property
    def bounded(self) -> bool:
        return self.verdict == BOUNDED

    @property
    def divergent(self) -> bool:
        return self.verdict == DIVERGENT


def classify_growth(
    hs: Sequence[float],
    values: Sequence[float],
    bounded_ratio: float = 1.1,
    divergent_ratio: float = 1.5,
    growth_tol: float = 0.02,
) -> GrowthVerdict:
    """Decide bounded / divergent / inconclusive from values on successively halved h.

    The exponent p is the log-log slope of the increments |v_{j+1} - v_j|
    against h: p > 0 means the sequence settles, p < 0 means power growth like
    h^p, and p near zero is the logarithmic borderline.
    """
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=float)
    if hs.shape != values.shape or hs.shape[0] < 3:
        raise ValueError("growth verdicts need at least 3 refinement levels")
    if not np.all(np.isfinite(values)):
        return GrowthVerdict(DIVERGENT, -math.inf, ())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = values[1:] / values[:-1]
    increments = np.abs(np.diff(values))
    scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    if np.all(increments <= 1e-12 * scale) or np.all(np.abs(ratios - 1.0) <= 1e-3):
        return GrowthVerdict(BOUNDED, math.inf, tuple(float(r) for r in ratios))

    exponent = float(np.polyfit(np.log(hs[1:]), np.log(np.maximum(increments, 1e-300)), 1)[0])
    increasing = bool(np.all(np.diff(values) > 0))
    if (increasing and exponent < -growth_tol) or np.all(ratios >= divergent_ratio):
        verdict = DIVERGENT
    elif exponent > growth_tol and abs(ratios[-1]) <= bounded_ratio:
        verdict = BOUNDED
    else:
        verdict = INCONCLUSIVE
    return GrowthVerdict(verdict, exponent, tuple(float(r) for r in ratios))


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)[0])


@dataclass(frozen=True)
class BoundaryCurve:
    eps: tuple[float, ...]
    values: tuple[float, ...]
    exponent: float
    satisfied: bool


def boundary_indicator_curve(
    grid: Grid, u: np.ndarray, eps_list: Sequence[float], min_exponent: float = 0.05
) -> BoundaryCurve:
    """Samples of (1/eps) * integral of u over {delta < eps} with the fitted decay exponent.

    The boundary condition counts as satisfied when the indicator decreases with
    eps and decays at least like eps^min_exponent.
    """
    eps = sorted((float(e) for e in eps_list), reverse=True)
    values = [boundary_strip_integral(grid, u, e) for e in eps]
    if len(eps) < 2 or min(values) <= 0:
        exponent = 0.0
    else:
        exponent = fit_exponent(eps, values)
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    return BoundaryCurve(tuple(eps), tuple(values), exponent, decreasing and exponent >= min_exponent)


@dataclass(frozen=True)
class LowerOrderNorms:
    plain: float
    weighted: float


def lower_order_norms(grid: Grid, h: ScalarNonlinearity, datum: np.ndarray, u: np.ndarray) -> LowerOrderNorms:
    """The integrals of h(u) f and of h(u) f delta."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("lower-order norms need u > 0 at every node")
    density = h(u) * np.asarray(datum, dtype=float)
    return LowerOrderNorms(integrate(grid, density), integrate(grid, density * grid.distance))


@dataclass(frozen=True)
class OperatorNorms:
    plain: float
    distance_weighted: float
    torsion_weighted: Optional[float] = None


def operator_norms(op: DiscreteOperator, u: np.ndarray, torsion: Optional[np.ndarray] = None) -> OperatorNorms:
    """Norms of L_h u in L^1, L^1(delta) and, when given, L^1(xi)."""
    density = np.abs(op.apply(u))
    grid = op.grid
    return OperatorNorms(
        plain=integrate(grid, density),
        distance_weighted=integrate(grid, density * grid.distance),
        torsion_weighted=None if torsion is None else integrate(grid, density * torsion),
    )


def lm_membership(
    grid: Grid,
    datum: DatumSpec,
    m_list: Sequence[float],
    levels: Optional[Sequence[int]] = None,
    **classify_options,
) -> dict[float, GrowthVerdict]:
    """Refinement verdict on the boundedness of the integral of f^m, per m.

    ``levels`` default to four dyadic refinements starting at the given grid.
    """
    if any(m < 1 for m in m_list):
        raise ValueError("L^m exponents must be >= 1")
    base = int(round(1.0 / grid.h))
    levels = list(levels) if levels is not None else [base * 2**j for j in range(4)]
    grids = [grid_for_level(grid.kind, grid.dimension, level) for level in levels]
    hs = [g.h for g in grids]
    samples = [datum.values(g) for g in grids]
    return {
        m: classify_growth(hs, [integrate(g, f**m) for g, f in zip(grids, samples)], **classify_options)
        for m in m_list
    }


def fundamental_profile(dimension: int, r: np.ndarray) -> np.ndarray:
    """Unnormalized radial fundamental solution: -log r for N = 2, r^(2-N) beyond."""
    return -np.log(r) if dimension == 2 else np.power(r, 2.0 - dimension)


def singularity_coefficient(grid: Grid, u: np.ndarray, width: float, r_outer: float = 0.2) -> float:
    """Least-squares c in u ~ c*E_N(r) + a + b*r^2 on the annulus 2*width <= r <= r_outer.

    For the Laplacian with a unit atom at the origin c tends to 1/|S^{N-1}|/(N-2)
    (1/(2 pi) when N = 2).
    """
    if grid.kind is not GridKind.RADIAL_BALL:
        raise GridError("singularity coefficients are fitted on radial grids")
    mask = (grid.nodes >= 2.0 * width) & (grid.nodes <= r_outer)
    if int(np.sum(mask)) < 3:
        raise GridError(f"annulus [{2 * width:g}, {r_outer:g}] holds fewer than 3 nodes")
    r = grid.nodes[mask]
    basis = np.column_stack([fundamental_profile(grid.dimension, r), np.ones_like(r), r**2])
    coefficients, *_ = np.linalg.lstsq(basis, np.asarray(u, dtype=float)[mask], rcond=None)
    return float(coefficients[0])


@dataclass(frozen=True)
class DiagnosticsReport:
    """Per-level diagnostics of one discrete solution."""

    h: float
    energy: float
    truncation_energy: float
    truncation_energy_pow: float
    gk_l1: float
    gk_q: float
    lower_order: float
    lower_order_weighted: float
    operator_l1: float
    operator_l1_delta: float
    indicator: tuple[float, ...]
    indicator_exponent: float

    def as_row(self) -> dict[str, float]:
        row = asdict(self)
        indicator = row.pop("indicator")
        row.update({f"indicator_{i}": v for i, v in enumerate(indicator)})
        return row


def diagnose(
    op: DiscreteOperator,
    h: ScalarNonlinearity,
    datum: np.ndarray,
    u: np.ndarray,
    gamma: float,
    k: float = 1.0,
    eps_list: Sequence[float] = (0.1, 0.05, 0.025, 0.0125),
) -> DiagnosticsReport:
    grid = op.grid
    usable = [e for e in eps_list if e >= 4 * grid.h]
    e_k, e_pow = truncation_energy(grid, op.coefficient, u, k, gamma)
    lower = lower_order_norms(grid, h, datum, u)
    norms = operator_norms(op, u)
    curve = boundary_indicator_curve(grid, u, usable) if usable else BoundaryCurve((), (), 0.0, False)
    return DiagnosticsReport(
        h=grid.h,
        energy=energy(grid, op.coefficient, u),
        truncation_energy=e_k,
        truncation_energy_pow=e_pow,
        gk_l1=gk_seminorm(grid, u, k, 1.0),
        gk_q=gk_seminorm(grid, u, k, gk_exponent(grid.dimension)),
        lower_order=lower.plain,
        lower_order_weighted=lower.weighted,
        operator_l1=norms.plain,
        operator_l1_delta=norms.distance_weighted,
        indicator=curve.values,
        indicator_exponent=curve.exponent,
    )
