import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergosearch.grid import (
    OBSTACLE,
    OPEN,
    DomainError,
    FlowSeries,
    OutOfDomainError,
    ScalarField,
    build_grid,
    points_in_polygon,
    sample_scalar,
    sample_vector,
)

BOX = [(0.7, 0.2), (0.8, 0.2), (0.8, 0.6), (0.7, 0.6)]


def test_cavity_grid_has_10x40_obstacle_block():
    g = build_grid((0, 0, 1, 1), 0.01, [BOX])
    assert (g.nx, g.ny) == (100, 100)
    rows, cols = np.nonzero(g.mask == OBSTACLE)
    assert len(rows) == 400
    assert (cols.min(), cols.max(), rows.min(), rows.max()) == (70, 79, 20, 59)


def test_coarse_grid_all_fluid():
    g = build_grid((0, 0, 1, 1), 0.5)
    assert g.shape == (2, 2)
    assert g.fluid.all()


def test_fully_covered_domain_rejected():
    with pytest.raises(DomainError):
        build_grid((0, 0, 1, 1), 0.01, [[(-1, -1), (2, -1), (2, 2), (-1, 2)]])


def test_degenerate_inputs_rejected():
    with pytest.raises(DomainError):
        build_grid((0, 0, 0, 1), 0.1)
    with pytest.raises(DomainError):
        build_grid((0, 0, 1, 1), 0.0)


def test_counts_use_ceiling():
    g = build_grid((0, 0, 1.05, 0.3), 0.1)
    assert (g.nx, g.ny) == (11, 3)


def test_edges_recorded():
    g = build_grid((0, 0, 1, 1), 0.1, edges={"west": OPEN})
    assert g.edges["west"] == OPEN and g.edges["east"] == "wall"


def test_point_in_obstacle_maps_to_obstacle_cell():
    g = build_grid((0, 0, 1, 1), 0.01, [BOX])
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0.705, 0.795, 200), rng.uniform(0.205, 0.595, 200)])
    assert not g.is_fluid_at(pts).any()


@settings(max_examples=30, deadline=None)
@given(
    cx=st.floats(0.2, 0.8), cy=st.floats(0.2, 0.8),
    rx=st.floats(0.03, 0.15), ry=st.floats(0.03, 0.15),
    h=st.sampled_from([0.04, 0.02, 0.01]),
)
def test_refinement_keeps_centroid_covered(cx, cy, rx, ry, h):
    tri = [(cx - rx, cy - ry), (cx + rx, cy - ry), (cx, cy + ry)]
    centroid = np.array([[cx, cy - ry / 3]])
    coarse = build_grid((0, 0, 1, 1), h, [tri])
    fine = build_grid((0, 0, 1, 1), h / 2, [tri])
    if not coarse.is_fluid_at(centroid)[0]:
        assert not fine.is_fluid_at(centroid)[0]


def test_points_in_polygon_square():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    inside = points_in_polygon(np.array([[0.5, 0.5], [1.5, 0.5], [0.5, -0.1]]), sq)
    assert inside.tolist() == [True, False, False]


# --------------------------------------------------------------- sampling

def _grid(n=10, **kw):
    return build_grid((0, 0, 1, 1), 1.0 / n, **kw)


def test_uniform_vector_sample():
    g = _grid()
    f = FlowSeries.steady(g, np.ones(g.shape), np.zeros(g.shape))
    for p in [(0.13, 0.77), (0.5, 0.5), (0.01, 0.99)]:
        assert sample_vector(f, p, 12.3) == pytest.approx((1.0, 0.0), abs=1e-14)


def test_time_interpolation_midpoint():
    g = _grid()
    wx = np.stack([np.zeros(g.shape), np.full(g.shape, 2.0)])
    f = FlowSeries(g, np.array([0.0, 10.0]), wx, np.zeros_like(wx))
    assert sample_vector(f, (0.45, 0.55), 5.0) == pytest.approx((1.0, 0.0))
    # clamped outside the snapshot range, exact at snapshot times
    assert sample_vector(f, (0.45, 0.55), -3.0)[0] == 0.0
    assert sample_vector(f, (0.45, 0.55), 99.0)[0] == 2.0
    assert sample_vector(f, (0.45, 0.55), 10.0)[0] == 2.0


def test_linear_field_halfway_between_centers():
    g = _grid()
    X, _ = g.centers()
    f = FlowSeries.steady(g, X.copy(), np.zeros(g.shape))
    # halfway between centers x=0.35 and x=0.45
    assert sample_vector(f, (0.4, 0.55), 0.0)[0] == pytest.approx(0.4, abs=1e-12)


def test_scalar_samples():
    g = _grid()
    X, _ = g.centers()
    assert sample_scalar(ScalarField(g, np.full(g.shape, 3.5)), (0.31, 0.62)) == pytest.approx(3.5)
    assert sample_scalar(ScalarField(g, X.copy()), (0.25, 0.65)) == pytest.approx(0.25)
    v = np.zeros(g.shape)
    v[:, 4] = 0.0
    v[:, 5] = 1.0
    assert sample_scalar(ScalarField(g, v), (0.5, 0.55)) == pytest.approx(0.5)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5),
    px=st.floats(0.05, 0.95), py=st.floats(0.05, 0.95),
)
def test_affine_fields_reproduced(a, b, c, px, py):
    g = _grid()
    X, Y = g.centers()
    f = ScalarField(g, a * X + b * Y + c)
    assert sample_scalar(f, (px, py)) == pytest.approx(a * px + b * py + c, abs=1e-12)


def test_sample_outside_bounds_raises():
    g = _grid()
    f = FlowSeries.steady(g, np.ones(g.shape), np.zeros(g.shape))
    with pytest.raises(OutOfDomainError):
        sample_vector(f, (1.2, 0.5), 0.0)
    with pytest.raises(OutOfDomainError):
        sample_scalar(ScalarField.zeros(g), (0.5, -0.01))


def test_masked_neighbours_renormalized_for_scalars():
    g = build_grid((0, 0, 1, 1), 0.1, [[(0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0)]])
    vals = np.where(g.fluid, 2.0, 1e6)
    # next to the masked half, only FLUID cells carry weight
    assert sample_scalar(ScalarField(g, vals), (0.49, 0.5)) == pytest.approx(2.0)


def test_masked_neighbours_zero_for_vectors():
    g = build_grid((0, 0, 1, 1), 0.1, [[(0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0)]])
    f = FlowSeries.steady(g, np.ones(g.shape), np.zeros(g.shape))
    # halfway between the last FLUID center (0.45) and the first masked one (0.55)
    assert sample_vector(f, (0.5, 0.55), 0.0)[0] == pytest.approx(0.5)


def test_flow_series_validation():
    g = _grid()
    w = np.zeros((2,) + g.shape)
    with pytest.raises(ValueError):
        FlowSeries(g, np.array([1.0, 1.0]), w, w)
    with pytest.raises(ValueError):
        FlowSeries(g, np.array([0.0]), w, w)


def test_scalar_field_integral():
    g = _grid()
    f = ScalarField(g, np.ones(g.shape))
    assert f.integral() == pytest.approx(1.0)
    assert math.isclose(ScalarField.zeros(g).integral(), 0.0)
