"""Tests for sdlab.core.data."""
from __future__ import annotations

import numpy as np
import pytest

from sdlab.core.data import (
    boundary_layer,
    boundary_layer_solution,
    datum_from_config,
    inverse_power,
    inverse_power_solution,
    log_weight,
    mollified_atom,
    power_of_distance,
    sharp_profile,
    table,
)
from sdlab.core.elliptic import assemble, solve_linear
from sdlab.core.geometry import GridKind, build_grid, integrate
from sdlab.errors import DatumError

INTERVAL = build_grid(GridKind.INTERVAL, 1, 99)
DISK = build_grid(GridKind.RADIAL_BALL, 2, 100)
BALL3 = build_grid(GridKind.RADIAL_BALL, 3, 100)


class TestPowerOfDistance:
    def test_values(self):
        f = power_of_distance(-0.5, 2.0).values(INTERVAL)
        assert np.allclose(f, 2.0 * INTERVAL.distance**-0.5)

    def test_truncated(self):
        f = power_of_distance(-1.0).truncated(INTERVAL, 10.0)
        assert f.max() == pytest.approx(10.0)

    def test_negative_scale_rejected(self):
        with pytest.raises(DatumError):
            power_of_distance(0.0, -1.0)


class TestBoundaryLayer:
    @pytest.mark.parametrize("eta", [0.0, 1.5])
    def test_eta_range(self, eta):
        with pytest.raises(DatumError):
            boundary_layer(eta, 1.0)

    def test_datum_reproduces_profile(self):
        # f / u^gamma is -Laplace u, so the linear solve recovers u
        op = assemble(DISK)
        exact = boundary_layer_solution(DISK, 1.0)
        rhs = boundary_layer(1.0, 1.0).values(DISK) / exact
        assert np.max(np.abs(solve_linear(op, rhs) - exact)) < 1e-3

    def test_interval_profile_vanishes_at_ends(self):
        u = boundary_layer_solution(INTERVAL, 0.8)
        assert u[0] < 0.1 and u[-1] < 0.1
        assert u.max() == pytest.approx(1.0, abs=1e-3)


class TestProfiles:
    def test_sharp_profile_at_least_one(self):
        assert np.all(sharp_profile(2.0).values(INTERVAL) >= 1.0)

    def test_sharp_profile_m_range(self):
        with pytest.raises(DatumError):
            sharp_profile(0.5)

    def test_log_weight_gamma_range(self):
        with pytest.raises(DatumError):
            log_weight(1.0, 2.0)

    def test_log_weight_positive(self):
        assert np.all(log_weight(0.5, 2.0).values(INTERVAL) > 0)


class TestMollifiedAtom:
    @pytest.mark.parametrize("grid,location", [(INTERVAL, 0.5), (DISK, 0.0), (BALL3, 0.0)])
    def test_discrete_mass(self, grid, location):
        atom = mollified_atom(location, mass=2.0, width=0.2)
        assert integrate(grid, atom.values(grid)) == pytest.approx(2.0)

    def test_radial_atom_must_sit_at_origin(self):
        with pytest.raises(DatumError):
            mollified_atom(0.3).values(DISK)

    def test_unresolved_width(self):
        with pytest.raises(DatumError):
            mollified_atom(0.505, width=0.001).values(INTERVAL)


class TestLuigi:
    def test_needs_three_dimensions(self):
        with pytest.raises(DatumError):
            inverse_power().values(DISK)

    def test_positive_on_ball(self):
        assert np.all(inverse_power(0.55, 0.5).values(BALL3) > 0)
        assert np.all(inverse_power_solution(BALL3, 0.55) > 0)


class TestTableAndFactory:
    def test_table_interpolates_in_distance(self):
        f = table([(0.0, 0.0), (0.5, 1.0)]).values(INTERVAL)
        assert np.allclose(f, 2.0 * INTERVAL.distance)

    def test_negative_table_rejected(self):
        with pytest.raises(DatumError):
            table([(0.0, -1.0), (0.5, 1.0)]).values(INTERVAL)

    def test_sum_of_data(self):
        total = power_of_distance(0.0) + power_of_distance(0.0, 2.0)
        assert np.allclose(total.values(INTERVAL), 3.0)

    def test_factory_builds_named_datum(self):
        assert datum_from_config("sharp_profile", {"m": 3.0}).params == {"m": 3.0}

    def test_factory_unknown_name(self):
        with pytest.raises(DatumError):
            datum_from_config("gaussian")

    def test_factory_bad_parameters(self):
        with pytest.raises(DatumError):
            datum_from_config("power_of_distance", {"power": 1.0})
