"""Conservative finite-volume discretization of L u = -div(a grad u) with Dirichlet data.

The operator is stored as L_h = W^-1 S where S is a symmetric tridiagonal
stiffness matrix and W = diag(grid.weights). Face conductances
b_f = a_f * m_f / d_f make S an M-matrix on every grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from sdlab.core.geometry import Grid
from sdlab.core.nonlinearity import ScalarNonlinearity
from sdlab.errors import GridError, NonConvergenceError, SolverError
from sdlab.log import get_logger

logger = get_logger("elliptic")

EIGEN_TOL = 1e-10
EIGEN_RESIDUAL_TOL = 1e-9
EIGEN_MAX_ITERS = 500
BARRIER_CAP = 2.0**60


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Scalar diffusion coefficient sampled on the faces of a grid."""

    face_values: np.ndarray
    alpha: float
    beta: float
    lipschitz: Optional[float] = None

    def validate(self, grid: Grid) -> "CoefficientField":
        if not 0 < self.alpha <= self.beta:
            raise GridError(f"ellipticity bounds must satisfy 0 < alpha <= beta, got ({self.alpha}, {self.beta})")
        values = self.face_values
        if values.shape != grid.face_coords.shape:
            raise GridError("coefficient must be sampled on every face of the grid")
        if np.any(values < self.alpha * (1 - 1e-12)) or np.any(values > self.beta * (1 + 1e-12)):
            raise GridError(
                f"coefficient leaves [{self.alpha:g}, {self.beta:g}]: "
                f"min {values.min():g}, max {values.max():g}"
            )
        if self.lipschitz is not None and values.shape[0] > 1:
            quotients = np.abs(np.diff(values) / np.diff(grid.face_coords))
            if quotients.max() > self.lipschitz * (1 + 1e-9):
                raise GridError(f"coefficient is not {self.lipschitz:g}-Lipschitz on the faces")
        return self


def constant_coefficient(grid: Grid, value: float = 1.0) -> CoefficientField:
    return CoefficientField(np.full(grid.face_coords.shape, float(value)), value, value, 0.0)


def coefficient_from_function(
    grid: Grid,
    fn: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    beta: float,
    lipschitz: Optional[float] = None,
) -> CoefficientField:
    values = np.asarray(fn(grid.face_coords), dtype=float)
    return CoefficientField(np.broadcast_to(values, grid.face_coords.shape).copy(), alpha, beta, lipschitz)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    coefficient: CoefficientField
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    conductance: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        """S u."""
        u = np.asarray(u, dtype=float)
        out = self.diagonal * u
        out[:-1] += self.off_diagonal * u[1:]
        out[1:] += self.off_diagonal * u[:-1]
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        """L_h u = W^-1 S u."""
        return self.stiffness_apply(u) / self.grid.weights

    def energy(self, u: np.ndarray) -> float:
        """u^T S u, the discrete Dirichlet form."""
        return float(np.sum(self.conductance * np.diff(self.grid.pad(u)) ** 2))

    def banded(self, extra_diagonal: Optional[np.ndarray] = None) -> np.ndarray:
        """S + diag(extra) in the (1, 1) layout of scipy.linalg.solve_banded."""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.off_diagonal
        ab[1] = self.diagonal if extra_diagonal is None else self.diagonal + extra_diagonal
        ab[2, :-1] = self.off_diagonal
        return ab

    def dense(self) -> np.ndarray:
        return (
            np.diag(self.diagonal)
            + np.diag(self.off_diagonal, 1)
            + np.diag(self.off_diagonal, -1)
        )


def assemble(grid: Grid, coefficient: Optional[CoefficientField] = None) -> DiscreteOperator:
    """Assemble -(a u')' on an interval or the radial operator on the ball."""
    coefficient = (coefficient or constant_coefficient(grid)).validate(grid)
    conductance = coefficient.face_values * grid.face_measure / grid.face_spacing
    if grid.left_dirichlet:
        left, right = conductance[:-1], conductance[1:]
    else:
        # the face r = 0 has zero measure
        left, right = np.concatenate(([0.0], conductance[:-1])), conductance
    diagonal = left + right
    off_diagonal = -right[:-1]
    for values in (diagonal, off_diagonal, conductance):
        values.setflags(write=False)
    return DiscreteOperator(
        grid=grid,
        coefficient=coefficient,
        diagonal=diagonal,
        off_diagonal=off_diagonal,
        conductance=conductance,
    )


def solve_stiffness(op: DiscreteOperator, load: np.ndarray, extra_diagonal: Optional[np.ndarray] = None) -> np.ndarray:
    """Solve (S + diag(extra)) x = load; ``load`` is already weighted."""
    try:
        x = solve_banded((1, 1), op.banded(extra_diagonal), load, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SolverError(f"banded solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("banded solve produced non-finite values")
    return x


def solve_linear(op: DiscreteOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve L_h u = rhs with homogeneous Dirichlet conditions."""
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (op.size,))
    if not np.all(np.isfinite(rhs)):
        raise SolverError("right-hand side is not finite at every node")
    return solve_stiffness(op, op.grid.weights * rhs)


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    phi: np.ndarray
    c1: float
    c2: float
    iterations: int

    def residual(self, op: DiscreteOperator) -> float:
        return float(np.max(np.abs(op.apply(self.phi) - self.lam * self.phi)))


def fitted_ratio_bounds(grid: Grid, values: np.ndarray) -> tuple[float, float]:
    """(min, max) of values / delta over the nodes."""
    ratio = np.asarray(values) / grid.distance
    return float(ratio.min()), float(ratio.max())


def first_eigenpair(op: DiscreteOperator, max_iters: int = EIGEN_MAX_ITERS) -> EigenPair:
    """Principal eigenpair by inverse power iteration, normalized to sup phi = 1."""
    weights = op.grid.weights
    v = np.ones(op.size)
    lam_old = math.inf
    for iteration in range(1, max_iters + 1):
        w = solve_stiffness(op, weights * v)
        lam = float(w @ op.stiffness_apply(w)) / float(w @ (weights * w))
        v = w / w[np.argmax(np.abs(w))]
        residual = float(np.max(np.abs(op.apply(v) - lam * v)))
        if abs(lam - lam_old) <= EIGEN_TOL * lam and residual <= EIGEN_RESIDUAL_TOL * lam:
            c1, c2 = fitted_ratio_bounds(op.grid, v)
            logger.debug("eigenpair converged in %d iterations: lambda=%.12g", iteration, lam)
            v.setflags(write=False)
            return EigenPair(lam=lam, phi=v, c1=c1, c2=c2, iterations=iteration)
        lam_old = lam
    raise NonConvergenceError(f"inverse iteration did not converge in {max_iters} iterations")


def torsion_function(op: DiscreteOperator) -> np.ndarray:
    """xi with L_h xi = 1; the operator is symmetric so L* = L."""
    return solve_linear(op, np.ones(op.size))


def barrier(eigpair: EigenPair, m: float, t: float) -> np.ndarray:
    """M * phi_1^t."""
    if m <= 0:
        raise ValueError(f"barrier scale must be positive, got {m}")
    if not 0 < t <= 1:
        raise ValueError(f"barrier exponent must lie in (0, 1], got {t}")
    return m * np.power(eigpair.phi, t)


@dataclass(frozen=True)
class BarrierCheck:
    passed: bool
    margin: float


def barrier_supersolution_check(
    op: DiscreteOperator,
    values: np.ndarray,
    h_bar: ScalarNonlinearity,
    datum: np.ndarray,
    region: Optional[np.ndarray] = None,
) -> BarrierCheck:
    """Whether L_h(barrier) - h_bar(barrier) * datum >= 0 on the region nodes."""
    residual = op.apply(values) - h_bar(values) * np.asarray(datum, dtype=float)
    if region is not None:
        residual = residual[np.asarray(region, dtype=bool)]
    if residual.size == 0:
        return BarrierCheck(passed=True, margin=math.inf)
    margin = float(np.min(residual))
    return BarrierCheck(passed=margin >= 0, margin=margin)


def find_barrier_constant(
    op: DiscreteOperator,
    eigpair: EigenPair,
    t: float,
    h_bar: ScalarNonlinearity,
    datum: np.ndarray,
    region: Optional[np.ndarray] = None,
    start: float = 1.0,
    cap: float = BARRIER_CAP,
) -> tuple[float, BarrierCheck]:
    """Double M from ``start`` until the barrier is a supersolution, up to ``cap``."""
    m = start
    while True:
        check = barrier_supersolution_check(op, barrier(eigpair, m, t), h_bar, datum, region)
        if check.passed or m >= cap:
            if not check.passed:
                logger.warning("no supersolution barrier found below M=%g (margin %.3g)", cap, check.margin)
            return m, check
        m *= 2.0
