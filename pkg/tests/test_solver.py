"""Tests for sdlab.core.solver."""
from __future__ import annotations

import numpy as np
import pytest

from sdlab.core.data import boundary_layer, boundary_layer_solution, power_of_distance
from sdlab.core.elliptic import assemble
from sdlab.core.geometry import GridKind, build_grid
from sdlab.core.nonlinearity import build_lower_envelope, make_bounded_h, make_model_h, make_table_h, regularize
from sdlab.core.solver import (
    Method,
    backward_error,
    bracket_violation,
    continuation_noise_floor,
    continue_in_n,
    dyadic_schedule,
    increments_not_settling,
    interior_lower_bound,
    lower_barrier,
    solve_desingularized,
    uniqueness_report,
)
from sdlab.errors import ConfigError, EmptyCompactSetError, SolverError

ONE = power_of_distance(0.0, 1.0)


def _rhs(op, h, datum, n, u):
    return regularize(h, n)(u) * datum.truncated(op.grid, n)


class TestSingleSolve:
    @pytest.mark.parametrize("method", [Method.NEWTON, Method.MONOTONE])
    def test_solution_satisfies_equation(self, interval_op, method):
        h = make_model_h(1.0)
        out = solve_desingularized(interval_op, h, ONE, 2.0**20, method=method)
        assert out.converged
        assert np.all(out.u > 0)
        assert backward_error(interval_op, out.u, _rhs(interval_op, h, ONE, 2.0**20, out.u)) < 1e-8

    def test_newton_and_monotone_agree(self, interval_op):
        h = make_model_h(2.0)
        newton = solve_desingularized(interval_op, h, ONE, 2.0**16, method="newton")
        monotone = solve_desingularized(interval_op, h, ONE, 2.0**16, method="monotone")
        assert np.max(np.abs(newton.u - monotone.u)) < 1e-7

    def test_monotone_bracket_collapses(self, interval_op):
        out = solve_desingularized(interval_op, make_model_h(0.5), ONE, 2.0**10, method="monotone")
        assert out.gap is not None and out.gap <= 1e-8
        assert np.all(out.lower <= out.upper)

    def test_crossed_bracket_raises(self, interval_op):
        h = make_model_h(1.0)
        solution = solve_desingularized(interval_op, h, ONE, 2.0**10, method="newton").u
        with pytest.raises(SolverError, match="cross"):
            solve_desingularized(interval_op, h, ONE, 2.0**10, method="monotone", subsolution=solution + 1e3)

    def test_warm_subsolution_keeps_ordering(self, interval_op):
        h = make_model_h(1.0)
        previous = solve_desingularized(interval_op, h, ONE, 2.0**8, method="monotone")
        out = solve_desingularized(interval_op, h, ONE, 2.0**10, method="monotone", subsolution=previous.u)
        assert out.converged
        assert np.all(out.lower >= previous.u - 1e-8)

    def test_bracket_violation(self):
        lower, upper = np.zeros(3), np.ones(3)
        assert bracket_violation(lower, upper, np.full(3, 0.2), np.full(3, 0.8)) == 0.0
        assert bracket_violation(lower, upper, np.array([-0.1, 0.0, 0.0]), upper) == pytest.approx(0.1)
        assert bracket_violation(lower, upper, lower, np.array([1.0, 1.3, 1.0])) == pytest.approx(0.3)
        assert bracket_violation(lower, upper, np.full(3, 0.6), np.full(3, 0.4)) == pytest.approx(0.2)

    def test_picard_for_a_contraction(self, interval_op):
        h = make_bounded_h(0.5)
        datum = power_of_distance(0.0, 0.1)
        picard = solve_desingularized(interval_op, h, datum, 4.0, method="picard")
        newton = solve_desingularized(interval_op, h, datum, 4.0, method="newton")
        assert np.max(np.abs(picard.u - newton.u)) < 1e-8

    def test_auto_picks_newton_for_general_h(self, interval_op):
        h = make_table_h([(0.1, 1.0), (1.0, 2.0)], gamma=1.0)
        out = solve_desingularized(interval_op, h, ONE, 8.0)
        assert out.method is Method.NEWTON

    def test_monotone_requires_nonincreasing_h(self, interval_op):
        h = make_table_h([(0.1, 1.0), (1.0, 2.0)], gamma=1.0)
        with pytest.raises(ConfigError):
            solve_desingularized(interval_op, h, ONE, 8.0, method="monotone")

    def test_relaxation_range(self, interval_op):
        with pytest.raises(ConfigError):
            solve_desingularized(interval_op, make_model_h(1.0), ONE, 8.0, method="picard", relaxation=1.5)

    def test_zero_datum_gives_zero(self, interval_op):
        out = solve_desingularized(interval_op, make_model_h(1.0), power_of_distance(0.0, 0.0), 8.0)
        assert np.all(out.u == 0)

    def test_manufactured_solution_on_disk(self):
        op = assemble(build_grid(GridKind.RADIAL_BALL, 2, 256))
        out = solve_desingularized(op, make_model_h(1.0), boundary_layer(1.0, 1.0), 2.0**30)
        exact = boundary_layer_solution(op.grid, 1.0)
        assert np.max(np.abs(out.u - exact)) < 1e-2


class TestContinuation:
    def test_schedule(self):
        assert dyadic_schedule(3) == [1.0, 2.0, 4.0, 8.0]

    def test_increments_shrink(self, interval_op):
        result = continue_in_n(interval_op, make_model_h(1.0), power_of_distance(-0.5), [2.0**j for j in range(4, 17)])
        assert result.converged
        assert not result.non_cauchy
        assert result.increments[-1] < result.increments[0]
        assert len(result.snapshots) == 13

    def test_smooth_problem_settles_from_n_equal_one(self, interval_op):
        result = continue_in_n(interval_op, make_model_h(1.0), ONE, [2.0**j for j in range(0, 31, 2)])
        assert result.converged
        assert not result.non_cauchy
        assert result.increments[-1] <= continuation_noise_floor(interval_op.grid, result.u, {})

    def test_noise_floor_follows_tolerances(self, interval_op):
        u = np.full(interval_op.size, 2.0)
        loose = continuation_noise_floor(interval_op.grid, u, {"tol": 1e-6, "bracket_tol": 1e-8})
        tight = continuation_noise_floor(interval_op.grid, u, {"tol": 1e-12, "bracket_tol": 1e-12})
        assert loose == pytest.approx(10 * 1e-6 * interval_op.grid.domain_measure * 2.0)
        assert tight < loose

    @pytest.mark.parametrize(
        "increments,expected",
        [
            ([0.08, 0.1, 0.05, 0.01, 1e-13, 2e-13], False),
            ([0.3, 0.2, 0.25, 0.1], True),
            ([0.1, 0.2, 0.4], True),
            ([1e-14, 3e-14], False),
            ([0.5], False),
        ],
    )
    def test_increments_not_settling(self, increments, expected):
        assert increments_not_settling(increments, floor=1e-10) is expected

    def test_truncation_iterates_increase(self, interval_op):
        result = continue_in_n(interval_op, make_model_h(1.0), power_of_distance(-0.5), dyadic_schedule(8))
        for before, after in zip(result.snapshots, result.snapshots[1:]):
            assert np.all(after.u >= before.u - 1e-9)

    def test_interior_bounds_positive(self, interval_op):
        result = continue_in_n(interval_op, make_model_h(1.0), ONE, dyadic_schedule(6), d_list=(0.1, 0.25))
        assert [d for d, _ in result.interior_bounds] == [0.1, 0.25]
        assert all(c > 0 for _, c in result.interior_bounds)

    def test_schedule_must_increase(self, interval_op):
        with pytest.raises(ConfigError):
            continue_in_n(interval_op, make_model_h(1.0), ONE, [4.0, 2.0])

    def test_empty_compact_set(self, interval_op):
        with pytest.raises(EmptyCompactSetError):
            interior_lower_bound(np.ones(interval_op.size), interval_op.grid, [0.6])


class TestUniqueness:
    def test_schemes_agree_for_model_h(self):
        op = assemble(build_grid(GridKind.INTERVAL, 1, 63))
        report = uniqueness_report(op, make_model_h(1.0), ONE, max_exponent=40)
        assert report.verdict == "consistent-with-uniqueness"
        assert set(report.distances_sup) == {"truncation-shift", "truncation-monotone", "shift-monotone"}

    def test_general_h_is_not_certified(self):
        op = assemble(build_grid(GridKind.INTERVAL, 1, 31))
        h = make_table_h([(0.1, 1.0), (1.0, 2.0)], gamma=1.0)
        report = uniqueness_report(op, h, ONE, max_exponent=4)
        assert report.verdict == "not-certified"
        assert report.warnings


class TestLowerBarrier:
    def test_barrier_grows_linearly_from_boundary(self, interval_op):
        lower = build_lower_envelope(make_model_h(1.5))
        result = lower_barrier(interval_op, lower, power_of_distance(-0.5))
        assert result.constant > 0
        assert np.all(result.values > 0)
