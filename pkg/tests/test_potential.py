import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergosearch.grid import OutOfDomainError, ScalarField, build_grid
from ergosearch.potential import (
    PotentialConfig,
    PotentialError,
    screened_poisson_matrix,
    solve_potential,
    unit_gradient,
    unit_gradients,
)

BOX = [(0.7, 0.2), (0.8, 0.2), (0.8, 0.6), (0.7, 0.6)]


def test_constant_source_gives_constant_potential():
    g = build_grid((0, 0, 1, 0.5), 0.02, [BOX[:2] + [(0.8, 0.4), (0.7, 0.4)]])
    u = solve_potential(ScalarField(g, np.full(g.shape, 2.5)), PotentialConfig(0.05))
    np.testing.assert_allclose(u.values[g.fluid], 2.5, rtol=1e-8)


@pytest.mark.parametrize("direct_limit", [100_000, 0])
def test_cosine_eigenfunction(direct_limit):
    L, k, alpha = 1.0, 3, 0.05
    g = build_grid((0, 0, L, 0.02), L / 200)
    X, _ = g.centers()
    m = np.cos(k * math.pi * X / L)
    t0 = time.perf_counter()
    u = solve_potential(ScalarField(g, m), PotentialConfig(alpha, tol=1e-10, direct_limit=direct_limit))
    elapsed = time.perf_counter() - t0
    exact = m / (1 + alpha * (k * math.pi / L) ** 2)
    err = np.abs(u.values - exact).max() / np.abs(exact).max()
    assert err <= 1e-3
    assert elapsed < 5.0


def test_point_mass_gives_positive_potential_everywhere():
    g = build_grid((0, 0, 1, 1), 0.02, [BOX])
    v = np.zeros(g.shape)
    v[10, 10] = 1.0
    u = solve_potential(ScalarField(g, v), PotentialConfig(0.05))
    assert u.values[g.fluid].min() > 0.0


def test_mean_value_on_closed_domain():
    g = build_grid((0, 0, 1, 1), 0.02, [BOX])
    rng = np.random.default_rng(2)
    m = ScalarField(g, np.where(g.fluid, rng.random(g.shape), 0.0))
    u = solve_potential(m, PotentialConfig(0.05, tol=1e-10))
    assert u.integral() == pytest.approx(m.integral(), rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_linearity(a, b, seed):
    g = build_grid((0, 0, 1, 1), 0.05, [BOX])
    rng = np.random.default_rng(seed)
    m1 = ScalarField(g, rng.random(g.shape))
    m2 = ScalarField(g, rng.random(g.shape))
    cfg = PotentialConfig(0.05, tol=1e-10)
    lhs = solve_potential(ScalarField(g, a * m1.values + b * m2.values), cfg).values
    rhs = a * solve_potential(m1, cfg).values + b * solve_potential(m2, cfg).values
    scale = max(1.0, np.abs(rhs).max())
    np.testing.assert_allclose(lhs[g.fluid], rhs[g.fluid], atol=1e-8 * scale)


def test_matrix_is_symmetric_positive_definite():
    g = build_grid((0, 0, 1, 1), 0.1, [BOX])
    A = screened_poisson_matrix(g, 0.05).toarray()
    np.testing.assert_allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0


def test_config_validation():
    with pytest.raises(ValueError):
        PotentialConfig(0.0)
    with pytest.raises(ValueError):
        PotentialConfig(0.05, tol=1e-3)


def test_non_convergence_reports_residual():
    g = build_grid((0, 0, 1, 1), 0.01)
    rng = np.random.default_rng(0)
    with pytest.raises(PotentialError) as info:
        solve_potential(ScalarField(g, rng.random(g.shape)), PotentialConfig(50.0, max_iter=2, direct_limit=0))
    assert info.value.residual > 0


def test_ramp_gradient_points_along_x():
    g = build_grid((0, 0, 1, 1), 0.05)
    X, _ = g.centers()
    u = ScalarField(g, X.copy())
    for p in [(0.3, 0.3), (0.52, 0.71), (0.9, 0.1)]:
        np.testing.assert_allclose(unit_gradient(u, p), (1.0, 0.0), atol=1e-12)


def test_constant_potential_has_no_direction():
    g = build_grid((0, 0, 1, 1), 0.05)
    u = ScalarField(g, np.full(g.shape, 4.0))
    assert unit_gradient(u, (0.5, 0.5)) is None
    assert np.isnan(unit_gradients(u, [(0.5, 0.5)])).all()


def test_direction_towards_point_mass():
    g = build_grid((0, 0, 1, 1), 0.01)
    v = np.zeros(g.shape)
    v[50, 50] = 1.0
    u = solve_potential(ScalarField(g, v), PotentialConfig(0.05))
    p = (g.xc[50] - 0.2, g.yc[50])
    d = unit_gradient(u, p)
    assert math.degrees(abs(math.atan2(d[1], d[0]))) < 1.0


def test_gradient_outside_domain_raises():
    g = build_grid((0, 0, 1, 1), 0.05)
    with pytest.raises(OutOfDomainError):
        unit_gradient(ScalarField.zeros(g), (1.5, 0.5))


@settings(max_examples=25, deadline=None)
@given(px=st.floats(0.01, 0.99), py=st.floats(0.01, 0.99))
def test_directions_have_unit_norm(px, py):
    g = build_grid((0, 0, 1, 1), 0.05, [BOX])
    X, Y = g.centers()
    u = ScalarField(g, np.sin(3 * X) * np.cos(2 * Y) + X * Y)
    d = unit_gradients(u, [(px, py)])[0]
    if not np.isnan(d).any():
        assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-9)


def test_wall_adjacent_gradient_is_one_sided():
    g = build_grid((0, 0, 1, 1), 0.1, [[(0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0)]])
    X, _ = g.centers()
    # decreasing towards the mask, huge inside it: masked values must not leak
    u = ScalarField(g, np.where(g.fluid, -X, 1e9))
    d = unit_gradient(u, (0.45, 0.55))
    np.testing.assert_allclose(d, (-1.0, 0.0), atol=1e-12)
