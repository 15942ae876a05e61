import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanpatrol.geometry import (Building, CameraSpec, GeometryError, Surface, area_law_count,
                                  build_surfaces, building_viewpoints, camera_footprint,
                                  filter_occluded_viewpoints, generate_viewpoints, inside_clearance,
                                  is_simple, min_area_rectangle, points_in_polygon, view_direction)

from oracles import footprint_dimensions

CAM = CameraSpec(84, 50, 10)
FW, FH = footprint_dimensions(84, 50, 10)


def facade(w, h, x0=0.0, y0=0.0):
    corners = ((x0, y0, 0.0), (x0 + w, y0, 0.0), (x0 + w, y0, h), (x0, y0, h))
    return Surface("facade", corners, 1, w * h)


def box(bid, x0, y0, x1, y1, h, prio=0):
    return Building(bid, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)), h, prio)


def test_camera_footprint_matches_pinhole_model():
    fp = camera_footprint(CAM)
    assert fp.width == pytest.approx(FW, abs=1e-12)
    assert fp.height == pytest.approx(FH, abs=1e-12)
    assert fp.width == pytest.approx(18.01, abs=0.01)
    assert fp.height == pytest.approx(9.33, abs=0.01)


def test_square_fov_footprint():
    fp = camera_footprint(CameraSpec(90, 90, 10))
    assert fp.width == pytest.approx(20.0) and fp.height == pytest.approx(20.0)


@pytest.mark.parametrize("bad", [(0, 50, 10), (84, 180, 10), (84, 50, 0), (84, 50, -1)])
def test_camera_rejects_degenerate(bad):
    with pytest.raises(GeometryError):
        CameraSpec(*bad)


def test_area_law_examples():
    fp = camera_footprint(CAM)
    assert area_law_count(fp.area, fp) == 1
    assert area_law_count(fp.area * 1.0001, fp) == 2
    assert area_law_count(4 * fp.area, fp) == 4


def test_facade_exact_multiple_gets_law_count():
    vps = generate_viewpoints(facade(2 * FW, 2 * FH), CAM)
    assert len(vps) == 4


def test_facade_grid_exceeds_law_and_is_logged(caplog):
    # 36 x 18.66 m: the area fits four footprints but 18.66 m is just over two
    # footprint heights, so the grid needs a third row
    caplog.set_level(logging.INFO, logger="urbanpatrol.geometry")
    s = facade(36.0, 18.66)
    vps = generate_viewpoints(s, CAM)
    assert area_law_count(s.area, camera_footprint(CAM)) == 4
    assert len(vps) == 6
    rec = [r for r in caplog.records if getattr(r, "grid_count", None) == 6]
    assert rec and rec[0].law_count == 4


def test_facade_poses_face_the_wall():
    s = facade(40.0, 20.0)
    vps = generate_viewpoints(s, CAM)
    for v in vps:
        c = v.patch.centroid
        assert np.allclose(v.xyz, c + CAM.standoff * s.normal)
        assert v.tilt == 0.0
        # the camera looks back at the patch centre
        assert np.allclose(v.optical_axis(), -s.normal, atol=1e-12)
        assert v.patch.area <= FW * FH + 1e-9


def test_facade_patches_tile_surface():
    s = facade(50.0, 23.0)
    vps = generate_viewpoints(s, CAM)
    assert sum(v.patch.area for v in vps) == pytest.approx(s.area)
    for v in vps:
        p = v.patch.points
        assert np.ptp(p[:, 0]) <= FW + 1e-9 and np.ptp(p[:, 2]) <= FH + 1e-9


def test_roof_viewpoints_look_down_from_standoff():
    b = box(1, 0, 0, 40, 20, 15)
    roof = build_surfaces(b)[-1]
    vps = generate_viewpoints(roof, CAM)
    assert vps
    for v in vps:
        assert v.tilt == 90.0
        assert v.position[2] == pytest.approx(15 + CAM.standoff)
        assert np.allclose(v.optical_axis(), [0, 0, -1], atol=1e-12)


def test_roof_grid_on_l_shape_drops_empty_cells():
    L = Building(1, ((0, 0), (60, 0), (60, 20), (20, 20), (20, 60), (0, 60)), 10)
    vps = generate_viewpoints(build_surfaces(L)[-1], CAM)
    full = math.ceil(60 / FW) * math.ceil(60 / FH)
    assert len(vps) < full
    g = np.arange(0.25, 60, 0.5)
    S = np.array([(x, y) for x in g for y in g])
    S = S[points_in_polygon(S, L.polygon)]
    cells = [(v.patch.points[:, 0].min(), v.patch.points[:, 0].max(),
              v.patch.points[:, 1].min(), v.patch.points[:, 1].max()) for v in vps]
    hit = np.zeros(len(S), dtype=bool)
    for x0, x1, y0, y1 in cells:
        inside = (S[:, 0] >= x0) & (S[:, 0] <= x1) & (S[:, 1] >= y0) & (S[:, 1] <= y1)
        assert inside.any()  # the cell overlaps the roof
        hit |= inside
    assert hit.all()  # and together the cells cover it


def test_build_surfaces_counts():
    b = box(3, 0, 0, 30, 10, 12)
    s = build_surfaces(b)
    assert [x.kind for x in s] == ["facade"] * 4 + ["roof"]
    assert sum(x.area for x in s[:4]) == pytest.approx(b.perimeter * 12)
    assert s[-1].area == pytest.approx(300)


def test_outward_normals_point_away_from_centroid():
    b = Building(1, ((0, 0), (0, 10), (10, 10), (10, 0)), 5)  # clockwise input
    assert b.area > 0
    c = b.centroid
    for s in build_surfaces(b)[:-1]:
        assert np.dot(s.centroid[:2] - c[:2], s.normal[:2]) > 0


def test_building_validation():
    with pytest.raises(GeometryError, match="at least 3"):
        Building(1, ((0, 0), (1, 0)), 5)
    with pytest.raises(GeometryError, match="height"):
        Building(1, ((0, 0), (1, 0), (0, 1)), 0)
    with pytest.raises(GeometryError, match="self-intersecting"):
        Building(1, ((0, 0), (10, 10), (10, 0), (0, 15)), 5)
    with pytest.raises(GeometryError, match="edge 1"):
        Building(1, ((0, 0), (5, 0), (5, 0), (0, 5)), 5)
    with pytest.raises(GeometryError, match="zero area"):
        Building(1, ((0, 0), (5, 0), (10, 0)), 5)


def test_is_simple():
    assert is_simple([(0, 0), (4, 0), (4, 4), (0, 4)])
    assert not is_simple([(0, 0), (4, 4), (4, 0), (0, 4)])


def test_view_direction_conventions():
    assert np.allclose(view_direction(0, 0), [0, 1, 0])      # north
    assert np.allclose(view_direction(90, 0), [1, 0, 0])     # east
    assert np.allclose(view_direction(0, 90), [0, 0, -1])    # straight down


def test_clearance_region():
    b = box(1, 0, 0, 10, 10, 10)
    pts = [(5, 5, 5), (-0.5, 5, 5), (-1.5, 5, 5), (5, 5, 10.9), (5, 5, 11.1)]
    assert inside_clearance(pts, b, 1.0).tolist() == [True, True, False, True, False]


def test_occluded_viewpoints_are_filtered():
    a = box(1, 0, 0, 20, 20, 20)
    # a neighbour 5 m away swallows the facade viewpoints of that side
    b = box(2, 25, 0, 45, 20, 20)
    vps = building_viewpoints([a, b], CAM)
    for v in vps[1] + vps[2]:
        assert not any(inside_clearance([v.position], x, 1.0)[0] for x in (a, b))
    alone = building_viewpoints([a], CAM)[1]
    assert len(vps[1]) < len(alone)
    assert filter_occluded_viewpoints([], [a]) == []


def test_viewpoint_ids_unique_and_stable():
    a = box(1, 0, 0, 20, 20, 20)
    b = box(2, 100, 0, 120, 20, 20)
    v = building_viewpoints([a, b], CAM)
    ids = [x.id for lst in v.values() for x in lst]
    assert len(ids) == len(set(ids))
    assert ids == sorted(ids)


def test_min_area_rectangle_against_rotation_sweep():
    rng = np.random.default_rng(5)
    for _ in range(20):
        P = rng.uniform(0, 50, size=(7, 2))
        origin, u, v, L1, L2 = min_area_rectangle(P)
        best = math.inf
        for a in np.linspace(0, math.pi / 2, 2001):
            R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
            Q = P @ R
            best = min(best, np.ptp(Q[:, 0]) * np.ptp(Q[:, 1]))
        assert L1 * L2 <= best + 1e-6
        local = np.column_stack([(P - origin) @ u, (P - origin) @ v])
        assert local.min() > -1e-7 and (local[:, 0] <= L1 + 1e-7).all() and (local[:, 1] <= L2 + 1e-7).all()


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 200), st.floats(0.5, 120))
def test_facade_count_never_below_area_law(w, h):
    vps = generate_viewpoints(facade(w, h), CAM)
    law = area_law_count(w * h, camera_footprint(CAM))
    assert len(vps) >= law
    assert len(vps) == math.ceil(w / FW - 1e-9) * math.ceil(h / FH - 1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(2, 150), st.floats(2, 150))
def test_rectangular_roof_count_never_below_area_law(w, d):
    b = box(1, 0, 0, w, d, 10)
    roof = build_surfaces(b)[-1]
    vps = generate_viewpoints(roof, CAM)
    assert len(vps) >= area_law_count(w * d, camera_footprint(CAM))
    grid = min(math.ceil(w / FW - 1e-9) * math.ceil(d / FH - 1e-9),
               math.ceil(w / FH - 1e-9) * math.ceil(d / FW - 1e-9))
    assert len(vps) == grid
