import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanpatrol.geometry import Building, inside_clearance
from urbanpatrol.pathplan.visibility import (DistanceOracle, DistanceTable, ObstacleError, blocked_intervals,
                                             obstacle_distance, segment_blocked_3d)

from oracles import grid_shortest_path


def box(bid, x0, y0, x1, y1, h):
    return Building(bid, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)), h)


def route_length(pts):
    return float(sum(np.linalg.norm(np.asarray(b) - np.asarray(a)) for a, b in zip(pts, pts[1:])))


def route_is_clear(pts, buildings, clearance, samples=200):
    for a, b in zip(pts, pts[1:]):
        t = np.linspace(0, 1, samples)[:, None]
        P = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
        for bld in buildings:
            # shrink a hair so points sliding along the boundary do not count
            if inside_clearance(P, bld, clearance - 1e-3).any():
                return False
    return True


def test_open_space_is_euclidean():
    o = DistanceOracle([])
    assert o.distance(np.array([0, 0, 0.0]), np.array([3, 4, 12.0])) == pytest.approx(13.0)


def test_detour_around_box_matches_grid_search():
    b = box(1, 0, 0, 20, 20, 30)
    a, c = np.array([-10.0, 10, 5]), np.array([30.0, 10, 5])
    d = obstacle_distance(a, c, [b], 1.0)
    grid = grid_shortest_path(a, c, [b.polygon], 1.0, step=0.25)
    assert d > 40.0
    assert d == pytest.approx(grid, rel=0.05)


def test_l_shape_detour_matches_grid_search():
    L = Building(1, ((0, 0), (40, 0), (40, 10), (10, 10), (10, 40), (0, 40)), 25)
    a, c = np.array([30.0, 20, 3]), np.array([-8.0, 5, 3])
    d = obstacle_distance(a, c, [L], 1.0)
    grid = grid_shortest_path(a, c, [L.polygon], 1.0, step=0.25)
    assert d == pytest.approx(grid, rel=0.05)


def test_flying_over_a_low_building_is_straight():
    b = box(1, 0, 0, 20, 20, 5)
    a, c = np.array([-10.0, 10, 12]), np.array([30.0, 10, 12])
    assert obstacle_distance(a, c, [b], 1.0) == pytest.approx(40.0)


def test_endpoint_in_obstacle_raises():
    b = box(7, 0, 0, 20, 20, 10)
    with pytest.raises(ObstacleError) as err:
        DistanceOracle([b]).distance(np.array([10.0, 10, 5]), np.array([40.0, 0, 5]))
    assert err.value.building_id == 7


def test_blocked_intervals_match_sampling():
    rng = np.random.default_rng(3)
    P = np.array([(0, 0), (10, 0), (10, 4), (4, 4), (4, 10), (0, 10)], float)
    from urbanpatrol.geometry import points_in_polygon
    for _ in range(50):
        a, b = rng.uniform(-5, 15, 2), rng.uniform(-5, 15, 2)
        iv = blocked_intervals(a, b, P, 0.0)
        t = (np.arange(2000) + 0.5) / 2000
        inside = points_in_polygon(a + t[:, None] * (b - a), P)
        pred = np.zeros_like(inside)
        for lo, hi in iv:
            pred |= (t > lo) & (t < hi)
        assert (pred == inside).mean() > 0.995


def test_segment_blocked_respects_height():
    b = box(1, 0, 0, 10, 10, 10)
    assert segment_blocked_3d(np.array([-5.0, 5, 5]), np.array([15.0, 5, 5]), b, 0.0)
    assert not segment_blocked_3d(np.array([-5.0, 5, 12]), np.array([15.0, 5, 12]), b, 0.0)
    # a climbing segment clears the roof edge only when high enough there
    assert segment_blocked_3d(np.array([-5.0, 5, 2]), np.array([15.0, 5, 20]), b, 0.0)


@pytest.fixture(scope="module")
def two_buildings():
    return [box(1, 0, 0, 20, 20, 20), box(2, 35, -10, 50, 30, 12)]


def test_table_is_metric_and_routes_agree(two_buildings):
    rng = np.random.default_rng(11)
    o = DistanceOracle(two_buildings, 1.0)
    pts = []
    while len(pts) < 14:
        p = np.array([rng.uniform(-20, 70), rng.uniform(-25, 45), rng.uniform(2, 30)])
        if not any(inside_clearance([p], b, 1.0)[0] for b in two_buildings):
            pts.append(p)
    T = DistanceTable(o, pts)
    D = T.matrix
    assert np.allclose(D, D.T)
    assert (D <= T.raw + 1e-9).all()
    n = len(pts)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                assert D[i, j] <= D[i, k] + D[k, j] + 1e-7
    for i in range(n):
        for j in range(i + 1, n):
            r = T.route(i, j)
            assert np.allclose(r[0], pts[i]) and np.allclose(r[-1], pts[j])
            assert route_length(r) == pytest.approx(D[i, j], rel=1e-9, abs=1e-9)
            assert route_is_clear(r, two_buildings, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(-20, 70), st.floats(-25, 45), st.floats(0.5, 35)),
       st.tuples(st.floats(-20, 70), st.floats(-25, 45), st.floats(0.5, 35)))
def test_oracle_routes_are_flyable(two_buildings, a, b):
    a, b = np.array(a), np.array(b)
    for p in (a, b):
        if any(inside_clearance([p], x, 1.0 + 1e-6)[0] for x in two_buildings):
            return
    o = DistanceOracle(two_buildings, 1.0)
    r = o.route(a, b)
    d = o.distance(a, b)
    assert d >= np.linalg.norm(b - a) - 1e-9
    assert route_length(r) == pytest.approx(d, rel=1e-9, abs=1e-9)
    assert route_is_clear(r, two_buildings, 1.0)
