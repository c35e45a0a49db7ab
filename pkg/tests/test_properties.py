"""Seeded randomized checks of the structural properties the solver relies on."""
from __future__ import annotations

import numpy as np
import pytest

from sdlab.core.elliptic import assemble, first_eigenpair, solve_linear
from sdlab.core.geometry import GridKind, build_grid
from sdlab.core.nonlinearity import (
    Scheme,
    build_lower_envelope,
    build_upper_envelope,
    make_bounded_h,
    make_model_h,
    make_power_pair_h,
    regularize,
    truncate_G,
    truncate_T,
)

SEED = 20240611


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.mark.parametrize("kind,dimension", [(GridKind.INTERVAL, 1), (GridKind.RADIAL_BALL, 3)])
def test_discrete_maximum_principle(rng, kind, dimension):
    op = assemble(build_grid(kind, dimension, 24))
    for _ in range(1000):
        rhs = rng.random(op.size) * (rng.random(op.size) < 0.5)
        u = solve_linear(op, rhs)
        assert u.min() >= -1e-12 * max(u.max(), 1.0)


@pytest.mark.parametrize("kind,dimension", [(GridKind.INTERVAL, 1), (GridKind.RADIAL_BALL, 2)])
def test_discrete_comparison_principle(rng, kind, dimension):
    op = assemble(build_grid(kind, dimension, 24))
    for _ in range(200):
        smaller = rng.normal(size=op.size)
        larger = smaller + rng.random(op.size)
        gap = solve_linear(op, larger) - solve_linear(op, smaller)
        assert gap.min() >= -1e-12 * max(np.abs(gap).max(), 1.0)


def test_truncations_split_identity(rng):
    for _ in range(200):
        k = rng.uniform(0.01, 10.0)
        s = rng.normal(scale=20.0, size=50)
        t, g = truncate_T(k, s), truncate_G(k, s)
        assert np.allclose(t + g, s)
        assert np.all(np.abs(t) <= k)
        assert np.all(g * s >= 0)


@pytest.mark.parametrize("spec", [make_bounded_h(0.4), make_power_pair_h(0.5, 1.5), make_model_h(1.5)])
def test_envelopes_sandwich_h(rng, spec):
    upper = build_upper_envelope(spec, samples_per_unit=128, s_max=50.0)
    lower = build_lower_envelope(spec)
    s = 10.0 ** rng.uniform(-5, 1.6, size=2000)
    assert np.all(upper(s) >= spec(s) * (1 - 1e-9))
    assert np.all(lower(s) <= np.minimum(spec(s), 1.0))


@pytest.mark.parametrize("scheme", list(Scheme))
def test_regularization_monotone_in_n(rng, scheme):
    h = make_model_h(0.8)
    s = np.sort(10.0 ** rng.uniform(-6, 2, size=500))
    levels = np.sort(2.0 ** rng.uniform(0, 30, size=8))
    previous = None
    for n in levels:
        hn = regularize(h, n, scheme)(s)
        assert np.all(hn <= h(s) * (1 + 1e-12))
        assert np.all(np.diff(hn) <= 1e-12 * hn[:-1])
        if previous is not None:
            assert np.all(hn >= previous * (1 - 1e-12))
        previous = hn


@pytest.mark.parametrize("kind,dimension", [(GridKind.INTERVAL, 1), (GridKind.RADIAL_BALL, 2)])
def test_eigen_residual_small(kind, dimension):
    op = assemble(build_grid(kind, dimension, 80))
    pair = first_eigenpair(op)
    assert pair.residual(op) <= 1e-8 * pair.lam


def test_hopf_constants_stable_under_refinement():
    pairs = [first_eigenpair(assemble(build_grid(GridKind.INTERVAL, 1, n))) for n in (63, 127, 255)]
    c1 = np.array([p.c1 for p in pairs])
    c2 = np.array([p.c2 for p in pairs])
    assert c1.max() <= 1.1 * c1.min()
    assert c2.max() <= 1.1 * c2.min()
    assert c1[-1] == pytest.approx(2.0, rel=0.05)
    assert c2[-1] == pytest.approx(np.pi, rel=0.05)
