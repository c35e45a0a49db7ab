"""Solvers for the desingularized problems L u_n = h_n(u_n) T_n(f) and the limit n -> inf."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from sdlab.core.data import DatumSpec
from sdlab.core.elliptic import DiscreteOperator, fitted_ratio_bounds, solve_stiffness, torsion_function
from sdlab.core.geometry import Grid, integrate
from sdlab.core.nonlinearity import (
    LowerEnvelope,
    RegularizedNonlinearity,
    ScalarNonlinearity,
    Scheme,
    regularize,
)
from sdlab.errors import ConfigError, EmptyCompactSetError, NonConvergenceError, SolverError
from sdlab.log import get_logger

logger = get_logger("solver")

DEFAULT_TOL = 1e-10
DEFAULT_BRACKET_TOL = 1e-8
DEFAULT_MAX_ITERS = 500
ARMIJO_C = 1e-4
MIN_STEP = 1e-12
_EPS = np.finfo(float).eps


class Method(str, Enum):
    AUTO = "auto"
    PICARD = "picard"
    NEWTON = "newton"
    MONOTONE = "monotone"


@dataclass
class SolveState:
    """Mutable per-solve state; never shared between solves."""

    n: float
    scheme: Scheme
    u: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    residual: float = math.inf
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    u: np.ndarray
    converged: bool
    n: float
    scheme: Scheme
    method: Method
    iterations: int
    residual: float
    gap: Optional[float] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Snapshot:
    n: float
    u: np.ndarray
    increment: Optional[float]
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: np.ndarray
    converged: bool
    final_n: float
    scheme: Scheme
    snapshots: list[Snapshot]
    interior_bounds: list[tuple[float, float]]
    non_cauchy: bool = False

    @property
    def increments(self) -> list[float]:
        return [s.increment for s in self.snapshots if s.increment is not None]


@dataclass(frozen=True)
class UniquenessReport:
    verdict: str
    distances_sup: dict[str, float]
    distances_l1: dict[str, float]
    bracket_gap: Optional[float]
    threshold: float
    warnings: list[str] = field(default_factory=list)
    solutions: dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _datum_values(grid: Grid, datum: DatumSpec | np.ndarray, n: float) -> np.ndarray:
    if isinstance(datum, DatumSpec):
        return datum.truncated(grid, n)
    values = np.broadcast_to(np.asarray(datum, dtype=float), grid.nodes.shape)
    return np.minimum(values, n)


def _abs_stiffness(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    """|S| |u|, the scale of rounding errors in S u."""
    a = np.abs(u)
    out = np.abs(op.diagonal) * a
    out[:-1] += np.abs(op.off_diagonal) * a[1:]
    out[1:] += np.abs(op.off_diagonal) * a[:-1]
    return out


def _residual(op: DiscreteOperator, u: np.ndarray, load: np.ndarray) -> np.ndarray:
    return op.stiffness_apply(u) - load


def backward_error(op: DiscreteOperator, u: np.ndarray, rhs: np.ndarray) -> float:
    """Componentwise relative residual of L_h u = rhs."""
    load = op.grid.weights * rhs
    scale = _abs_stiffness(op, u) + np.abs(load)
    r = np.abs(_residual(op, u, load))
    return float(np.max(r / np.maximum(scale, np.finfo(float).tiny)))


def _initial_guess(op: DiscreteOperator, hn: RegularizedNonlinearity, fn: np.ndarray) -> np.ndarray:
    gamma = float(getattr(hn.base, "gamma", 1.0))
    exponent = 1.0 / (1.0 + gamma)
    scale = max(integrate(op.grid, fn) / op.grid.domain_measure, 1e-12)
    return (scale * torsion_function(op)) ** exponent


def _positive_start(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    floor = 1e-12 * max(float(np.max(np.abs(u))), 1e-300)
    return np.where(u > floor, u, floor)


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------


def _picard(
    op: DiscreteOperator,
    hn: RegularizedNonlinearity,
    fn: np.ndarray,
    state: SolveState,
    tol: float,
    max_iters: int,
    relaxation: float,
) -> SolveState:
    for state.iterations in range(1, max_iters + 1):
        update = solve_stiffness(op, op.grid.weights * hn(state.u) * fn)
        state.u = np.maximum((1.0 - relaxation) * state.u + relaxation * update, 0.0)
        state.residual = backward_error(op, state.u, hn(state.u) * fn)
        logger.debug("picard n=%g it=%d residual=%.3e", state.n, state.iterations, state.residual)
        if state.residual <= tol:
            return state
    raise NonConvergenceError(
        f"Picard iteration did not converge in {max_iters} iterations (residual {state.residual:.3e})"
    )


def _newton(
    op: DiscreteOperator,
    hn: RegularizedNonlinearity,
    fn: np.ndarray,
    state: SolveState,
    tol: float,
    max_iters: int,
) -> SolveState:
    """Damped semismooth Newton with Armijo backtracking; iterates stay positive."""
    weights = op.grid.weights
    u = _positive_start(state.u)

    def scaled_residual(v: np.ndarray) -> np.ndarray:
        return _residual(op, v, weights * hn(v) * fn) / weights

    res = scaled_residual(u)
    merit = 0.5 * float(res @ res)
    for state.iterations in range(1, max_iters + 1):
        jacobian_shift = -weights * hn.slope(u) * fn
        step = solve_stiffness(op, -res * weights, jacobian_shift)
        shrinking = step < 0
        alpha = 1.0
        if np.any(shrinking):
            alpha = min(1.0, 0.995 * float(np.min(u[shrinking] / -step[shrinking])))
        while True:
            trial = u + alpha * step
            trial_res = scaled_residual(trial)
            trial_merit = 0.5 * float(trial_res @ trial_res)
            if trial_merit <= (1.0 - 2.0 * ARMIJO_C * alpha) * merit or trial_merit == 0.0:
                break
            alpha *= 0.5
            if alpha < MIN_STEP:
                break
        correction = alpha * float(np.max(np.abs(step)))
        # quadratic convergence stalls once the residual reaches rounding level
        stalled = trial_merit > 0.25 * merit
        u, res, merit = trial, trial_res, trial_merit
        state.residual = backward_error(op, u, hn(u) * fn)
        logger.debug(
            "newton n=%g it=%d alpha=%.2e residual=%.3e", state.n, state.iterations, alpha, state.residual
        )
        if state.residual <= tol and (correction <= tol * float(np.max(u)) or stalled):
            state.u = u
            return state
        if alpha < MIN_STEP:
            break
    state.u = u
    raise NonConvergenceError(
        f"Newton did not converge for n={state.n:g} after {state.iterations} iterations "
        f"(residual {state.residual:.3e})"
    )


def _is_subsolution(op: DiscreteOperator, v: np.ndarray, hn: RegularizedNonlinearity, fn: np.ndarray) -> bool:
    return bool(np.all(_residual(op, v, op.grid.weights * hn(v) * fn) <= 0))


def _is_supersolution(op: DiscreteOperator, v: np.ndarray, hn: RegularizedNonlinearity, fn: np.ndarray) -> bool:
    return bool(np.all(_residual(op, v, op.grid.weights * hn(v) * fn) >= 0))


def _certified_bracket(
    op: DiscreteOperator, hn: RegularizedNonlinearity, fn: np.ndarray, u: np.ndarray
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Sub/supersolution pair u -+ eta*xi around an approximate solution u."""
    weights = op.grid.weights
    load = weights * hn(u) * fn
    slack = (np.abs(_residual(op, u, load)) + 16 * _EPS * (_abs_stiffness(op, u) + np.abs(load))) / weights
    eta = 2.0 * float(np.max(slack)) + np.finfo(float).tiny
    xi = torsion_function(op)
    lower = np.maximum(u - eta * xi, 0.0)
    upper = u + eta * xi
    if _is_subsolution(op, lower, hn, fn) and _is_supersolution(op, upper, hn, fn):
        return lower, upper
    return None


def bracket_violation(
    lower: np.ndarray, upper: np.ndarray, new_lower: np.ndarray, new_upper: np.ndarray
) -> float:
    """How far one sweep departs from lower <= new_lower <= new_upper <= upper (0 if it does not)."""
    return float(
        max(
            np.max(lower - new_lower),
            np.max(new_upper - upper),
            np.max(new_lower - new_upper),
            0.0,
        )
    )


def _ordering_allowance(upper: np.ndarray, bracket_tol: float) -> float:
    # seeds from a previous solve are only known to within bracket_tol
    return 2.0 * bracket_tol + 64.0 * _EPS * float(np.max(np.abs(upper)))


def _monotone(
    op: DiscreteOperator,
    hn: RegularizedNonlinearity,
    fn: np.ndarray,
    state: SolveState,
    tol: float,
    bracket_tol: float,
    max_iters: int,
) -> SolveState:
    """Shifted sub/supersolution iteration; each sweep keeps a_k <= a_k+1 <= b_k+1 <= b_k."""
    weights = op.grid.weights
    lower = np.zeros(op.size) if state.lower is None else np.maximum(state.lower, 0.0)
    upper = solve_stiffness(op, weights * hn(np.zeros(op.size)) * fn)

    try:
        candidate = _newton(op, hn, fn, SolveState(n=state.n, scheme=state.scheme, u=state.u), tol, max_iters)
        tight = _certified_bracket(op, hn, fn, candidate.u)
    except NonConvergenceError as exc:
        logger.debug("newton candidate rejected inside monotone solve: %s", exc)
        tight = None
    if tight is not None:
        lower, upper = np.maximum(lower, tight[0]), np.minimum(upper, tight[1])

    gap = float(np.max(upper - lower))
    state.iterations = 0
    allowed = _ordering_allowance(upper, bracket_tol)
    crossing = float(np.max(lower - upper))
    if crossing > allowed:
        raise SolverError(f"sub- and supersolution cross by {crossing:.3e} at n={state.n:g}")
    while gap > bracket_tol and state.iterations < max_iters:
        state.iterations += 1
        shift = weights * fn * hn.max_abs_slope(lower, upper)

        def sweep(v: np.ndarray) -> np.ndarray:
            return solve_stiffness(op, weights * hn(v) * fn + shift * v, shift)

        new_lower, new_upper = sweep(lower), sweep(upper)
        violation = bracket_violation(lower, upper, new_lower, new_upper)
        if violation > allowed:
            raise SolverError(f"monotone sweep broke the bracket ordering at n={state.n:g} by {violation:.3e}")
        # violations within the allowance are rounding and get clipped
        lower, upper = np.maximum(lower, new_lower), np.minimum(upper, new_upper)
        upper = np.maximum(upper, lower)
        gap = float(np.max(upper - lower))
        logger.debug("monotone n=%g it=%d gap=%.3e violation=%.1e", state.n, state.iterations, gap, violation)

    state.lower, state.upper = lower, upper
    state.u = 0.5 * (lower + upper)
    state.residual = backward_error(op, state.u, hn(state.u) * fn)
    return state


def solve_desingularized(
    op: DiscreteOperator,
    h: ScalarNonlinearity,
    datum: DatumSpec | np.ndarray,
    n: float,
    scheme: Scheme | str = Scheme.TRUNCATION,
    method: Method | str = Method.AUTO,
    tol: float = DEFAULT_TOL,
    bracket_tol: float = DEFAULT_BRACKET_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    relaxation: float = 1.0,
    initial: Optional[np.ndarray] = None,
    subsolution: Optional[np.ndarray] = None,
) -> SolveOutcome:
    """Solve L_h u = h_n(u) T_n(f) for one regularization index n.

    ``subsolution`` seeds the lower bracket of the monotone method.
    """
    scheme, method = Scheme(scheme), Method(method)
    hn = regularize(h, n, scheme)
    if method is Method.AUTO:
        method = Method.MONOTONE if hn.nonincreasing else Method.NEWTON
    if method is Method.MONOTONE and not hn.nonincreasing:
        raise ConfigError("the monotone method needs a nonincreasing nonlinearity")
    if not 0 < relaxation <= 1:
        raise ConfigError(f"relaxation must lie in (0, 1], got {relaxation}")

    fn = _datum_values(op.grid, datum, n)
    if not np.any(fn > 0):
        zero = np.zeros(op.size)
        return SolveOutcome(u=zero, converged=True, n=n, scheme=scheme, method=method, iterations=0, residual=0.0)

    if method is Method.PICARD:
        start = np.zeros(op.size) if initial is None else initial
    else:
        start = _initial_guess(op, hn, fn) if initial is None else initial
    state = SolveState(n=n, scheme=scheme, u=np.asarray(start, dtype=float), lower=subsolution)

    gap = None
    if method is Method.PICARD:
        _picard(op, hn, fn, state, tol, max_iters, relaxation)
        converged = True
    elif method is Method.NEWTON:
        _newton(op, hn, fn, state, tol, max_iters)
        converged = True
    else:
        _monotone(op, hn, fn, state, tol, bracket_tol, max_iters)
        gap = float(np.max(state.upper - state.lower))
        converged = gap <= bracket_tol
        if not converged:
            logger.warning("bracket did not collapse for n=%g: final gap %.3e", n, gap)

    return SolveOutcome(
        u=state.u,
        converged=converged,
        n=n,
        scheme=scheme,
        method=method,
        iterations=state.iterations,
        residual=state.residual,
        gap=gap,
        lower=state.lower,
        upper=state.upper,
    )


# ---------------------------------------------------------------------------
# Continuation and reports
# ---------------------------------------------------------------------------


def dyadic_schedule(max_exponent: int) -> list[float]:
    return [float(2**j) for j in range(max_exponent + 1)]


def interior_lower_bound(u: np.ndarray, grid: Grid, d_list: Sequence[float]) -> list[tuple[float, float]]:
    """c_omega = min of u over {delta >= d} for each d."""
    u = np.asarray(u, dtype=float)
    bounds = []
    for d in d_list:
        mask = grid.distance >= d
        if not np.any(mask):
            raise EmptyCompactSetError(f"no grid node with distance >= {d:g} to the boundary")
        bounds.append((float(d), float(np.min(u[mask]))))
    return bounds


def continuation_noise_floor(grid: Grid, u: np.ndarray, solver_options: dict) -> float:
    """L1 size below which an increment between two solves is solver noise."""
    tol = max(solver_options.get("bracket_tol", DEFAULT_BRACKET_TOL), solver_options.get("tol", DEFAULT_TOL))
    return 10.0 * tol * grid.domain_measure * max(1.0, float(np.max(np.abs(u))))


def increments_not_settling(increments: Sequence[float], floor: float) -> bool:
    """True when the increments above ``floor`` still grow after their peak, or peak at the end.

    Increments may rise while the truncation first bites; only the tail is judged.
    """
    if len(increments) < 2:
        return False
    peak = int(np.argmax(increments))
    if peak == len(increments) - 1 and increments[peak] > floor:
        return True
    tail = increments[peak:]
    return any(b > a * (1 + 1e-6) and b > floor for a, b in itertools.pairwise(tail))


def continue_in_n(
    op: DiscreteOperator,
    h: ScalarNonlinearity,
    datum: DatumSpec | np.ndarray,
    n_schedule: Optional[Sequence[float]] = None,
    scheme: Scheme | str = Scheme.TRUNCATION,
    method: Method | str = Method.AUTO,
    d_list: Sequence[float] = (0.05, 0.1, 0.25),
    **solver_options,
) -> SolveResult:
    """Warm-started solves along an increasing schedule of n with Cauchy reporting."""
    scheme = Scheme(scheme)
    schedule = list(n_schedule) if n_schedule is not None else dyadic_schedule(20)
    if not schedule or any(b <= a for a, b in itertools.pairwise(schedule)):
        raise ConfigError("the n schedule must be a nonempty increasing sequence")
    # for the truncation scheme the previous solution is a subsolution of the next problem
    ordered = scheme is Scheme.TRUNCATION and bool(getattr(h, "nonincreasing", False))

    snapshots: list[Snapshot] = []
    previous: Optional[np.ndarray] = None
    previous_converged = False
    for n in schedule:
        outcome = solve_desingularized(
            op,
            h,
            datum,
            n,
            scheme=scheme,
            method=method,
            initial=previous,
            subsolution=previous if ordered and previous_converged else None,
            **solver_options,
        )
        increment = None if previous is None else integrate(op.grid, np.abs(outcome.u - previous))
        snapshots.append(Snapshot(n, outcome.u, increment, outcome.iterations, outcome.converged))
        previous, previous_converged = outcome.u, outcome.converged

    increments = [s.increment for s in snapshots if s.increment is not None]
    floor = continuation_noise_floor(op.grid, previous, solver_options)
    non_cauchy = increments_not_settling(increments, floor)
    if non_cauchy:
        logger.warning("continuation increments are not decreasing: %s", ", ".join(f"{v:.3e}" for v in increments))

    usable = [d for d in d_list if np.any(op.grid.distance >= d)]
    return SolveResult(
        u=previous,
        converged=all(s.converged for s in snapshots),
        final_n=schedule[-1],
        scheme=scheme,
        snapshots=snapshots,
        interior_bounds=interior_lower_bound(previous, op.grid, usable),
        non_cauchy=non_cauchy,
    )


def uniqueness_report(
    op: DiscreteOperator,
    h: ScalarNonlinearity,
    datum: DatumSpec | np.ndarray,
    max_exponent: int = 40,
    tol: float = DEFAULT_TOL,
    bracket_tol: float = DEFAULT_BRACKET_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> UniquenessReport:
    """Compare truncation, shift and monotone-bracket limits of the same problem."""
    warnings: list[str] = []
    nonincreasing = bool(getattr(h, "nonincreasing", False))
    schedule = dyadic_schedule(max_exponent)
    options = {"tol": tol, "bracket_tol": bracket_tol, "max_iters": max_iters}
    solve_method = Method.MONOTONE if nonincreasing else Method.NEWTON
    if not nonincreasing:
        warnings.append("nonlinearity is not flagged nonincreasing; uniqueness cannot be certified")
        logger.warning(warnings[-1])

    solutions = {
        "truncation": continue_in_n(op, h, datum, schedule, Scheme.TRUNCATION, solve_method, (), **options).u,
        "shift": continue_in_n(op, h, datum, schedule, Scheme.SHIFT, solve_method, (), **options).u,
    }
    gap = None
    if nonincreasing:
        bracket = solve_desingularized(
            op, h, datum, schedule[-1], Scheme.TRUNCATION, Method.MONOTONE, initial=solutions["truncation"], **options
        )
        solutions["monotone"] = bracket.u
        gap = bracket.gap
        if not bracket.converged:
            warnings.append(f"monotone bracket did not collapse (gap {gap:.3e})")

    sup_distances: dict[str, float] = {}
    l1_distances: dict[str, float] = {}
    for (a, ua), (b, ub) in itertools.combinations(solutions.items(), 2):
        key = f"{a}-{b}"
        sup_distances[key] = float(np.max(np.abs(ua - ub)))
        l1_distances[key] = integrate(op.grid, np.abs(ua - ub))

    threshold = 100.0 * tol
    agree = all(v <= threshold for v in sup_distances.values())
    bracket_ok = gap is not None and gap <= bracket_tol
    verdict = "consistent-with-uniqueness" if nonincreasing and agree and bracket_ok else "not-certified"
    return UniquenessReport(
        verdict=verdict,
        distances_sup=sup_distances,
        distances_l1=l1_distances,
        bracket_gap=gap,
        threshold=threshold,
        warnings=warnings,
        solutions=solutions,
    )


@dataclass(frozen=True, eq=False)
class LowerBarrier:
    values: np.ndarray
    constant: float


def lower_barrier(op: DiscreteOperator, lower: LowerEnvelope, datum: DatumSpec | np.ndarray, **options) -> LowerBarrier:
    """v with L_h v = h_low(v) T_1(f), and the constant C in v >= C delta."""
    outcome = solve_desingularized(op, lower, datum, 1.0, Scheme.TRUNCATION, Method.MONOTONE, **options)
    constant, _ = fitted_ratio_bounds(op.grid, outcome.u)
    return LowerBarrier(values=outcome.u, constant=constant)
