"""Buildings, surfaces and camera viewpoints.

Buildings are right prisms: a simple counter-clockwise footprint polygon
extruded from the ground to a fixed height.  Each prism yields one facade per
footprint edge plus a roof, and each surface is tiled into camera patches
with one viewpoint pose per patch.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

log = logging.getLogger(__name__)

TOL = 1e-6
CLEARANCE = 1.0


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


# ----------------------------------------------------------------------------
# planar polygon helpers
# ----------------------------------------------------------------------------

def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-12:
        return p.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test (touching counts)."""
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def is_simple(poly) -> bool:
    p = [tuple(map(float, v)) for v in poly]
    n = len(p)
    for i in range(n):
        a1, a2 = p[i], p[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, p[j], p[(j + 1) % n]):
                return False
    return True


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd containment for an (m, 2) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = np.asarray(poly, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x1, y1 = P[:, 0], P[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (x < xint)
    return (hits.sum(axis=1) % 2) == 1


def distance_to_polygon(points, poly) -> np.ndarray:
    """Horizontal distance from points to the filled polygon (0 inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = np.asarray(poly, dtype=float)
    a = P[None, :, :]
    b = np.roll(P, -1, axis=0)[None, :, :]
    q = pts[:, None, :]
    ab = b - a
    t = np.clip(((q - a) * ab).sum(-1) / np.maximum((ab * ab).sum(-1), 1e-300), 0.0, 1.0)
    closest = a + t[..., None] * ab
    d = np.sqrt(((q - closest) ** 2).sum(-1)).min(axis=1)
    d[points_in_polygon(pts, P)] = 0.0
    return d


def min_area_rectangle(poly):
    """Minimum-area oriented bounding rectangle.

    Returns ``(origin, u, v, length_u, length_v)`` where ``u`` and ``v`` are
    orthonormal axes and the rectangle is ``origin + s*u + t*v`` for
    ``s in [0, length_u]``, ``t in [0, length_v]``.
    """
    P = np.asarray(poly, dtype=float)
    hull = P[ConvexHull(P).vertices]
    best = None
    for i in range(len(hull)):
        e = hull[(i + 1) % len(hull)] - hull[i]
        norm = math.hypot(*e)
        if norm < TOL:
            continue
        u = e / norm
        v = np.array([-u[1], u[0]])
        su, sv = hull @ u, hull @ v
        area = (su.max() - su.min()) * (sv.max() - sv.min())
        if best is None or area < best[0] - 1e-9:
            best = (area, u, v, su.min(), su.max(), sv.min(), sv.max())
    _, u, v, s0, s1, t0, t1 = best
    origin = s0 * u + t0 * v
    return origin, u, v, s1 - s0, t1 - t0


def _shoelace(pts) -> float:
    n = len(pts)
    return 0.5 * sum(pts[i][0] * pts[(i + 1) % n][1] - pts[(i + 1) % n][0] * pts[i][1] for i in range(n))


def _clip_box(ring, x0, x1, y0, y1):
    out = ring
    for axis, bound, sign in ((0, x0, 1), (0, x1, -1), (1, y0, 1), (1, y1, -1)):
        if not out:
            break
        src, out = out, []
        for i, cur in enumerate(src):
            prev = src[i - 1]
            cin = sign * (cur[axis] - bound) >= 0
            pin = sign * (prev[axis] - bound) >= 0
            if cin != pin:
                t = (bound - prev[axis]) / (cur[axis] - prev[axis])
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            if cin:
                out.append(cur)
    return out


def clip_polygon_to_box(poly, x0, x1, y0, y1) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned box."""
    ring = [tuple(p) for p in np.asarray(poly, dtype=float).tolist()]
    return np.array(_clip_box(ring, x0, x1, y0, y1)).reshape(-1, 2)


# ----------------------------------------------------------------------------
# domain types
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Building:
    id: int
    footprint: tuple
    height: float
    priority: int = 0

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.footprint)
        if len(pts) < 3:
            raise GeometryError(f"building {self.id}: footprint needs at least 3 points, got {len(pts)}")
        if not self.height > 0:
            raise GeometryError(f"building {self.id}: height must be positive, got {self.height}")
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            if math.hypot(b[0] - a[0], b[1] - a[1]) < TOL:
                raise GeometryError(f"building {self.id}: zero-length edge {i} ({a} -> {b})")
        area = signed_area(pts)
        if abs(area) < 1e-9:
            raise GeometryError(f"building {self.id}: footprint has zero area")
        if not is_simple(pts):
            raise GeometryError(f"building {self.id}: footprint is self-intersecting")
        if area < 0:
            pts = pts[::-1]
        object.__setattr__(self, "footprint", pts)
        object.__setattr__(self, "height", float(self.height))

    @property
    def polygon(self) -> np.ndarray:
        return np.asarray(self.footprint, dtype=float)

    @property
    def area(self) -> float:
        return signed_area(self.footprint)

    @property
    def perimeter(self) -> float:
        P = self.polygon
        return float(np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1).sum())

    @property
    def centroid(self) -> np.ndarray:
        """Volume centroid of the prism."""
        c = polygon_centroid(self.footprint)
        return np.array([c[0], c[1], self.height / 2.0])


@dataclass(frozen=True)
class Surface:
    kind: str
    corners: tuple
    building_id: int
    area: float

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.corners, dtype=float)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @property
    def normal(self) -> np.ndarray:
        """Outward unit normal (facades: horizontal, roofs: +z)."""
        if self.kind == "roof":
            return np.array([0.0, 0.0, 1.0])
        p = self.points
        e = p[1] - p[0]
        n = np.array([e[1], -e[0], 0.0])
        return n / np.linalg.norm(n)


@dataclass(frozen=True)
class CameraSpec:
    fov_width: float
    fov_height: float
    standoff: float

    def __post_init__(self):
        if not 0 < self.fov_width < 180 or not 0 < self.fov_height < 180:
            raise GeometryError(f"camera field of view must lie in (0, 180) degrees: {self}")
        if not self.standoff > 0:
            raise GeometryError(f"camera standoff must be positive: {self.standoff}")


@dataclass(frozen=True)
class Footprint2D:
    width: float
    height: float

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Viewpoint:
    id: int
    position: tuple
    bearing: float
    tilt: float
    patch: Surface
    building_id: int

    @property
    def xyz(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    def optical_axis(self) -> np.ndarray:
        return view_direction(self.bearing, self.tilt)


def view_direction(bearing: float, tilt: float) -> np.ndarray:
    """Unit vector for a compass bearing (cw from +y) and a downward tilt."""
    b, t = math.radians(bearing), math.radians(tilt)
    return np.array([math.sin(b) * math.cos(t), math.cos(b) * math.cos(t), -math.sin(t)])


def compass_bearing(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(dx, dy)) % 360.0


# ----------------------------------------------------------------------------
# operations
# ----------------------------------------------------------------------------

def build_surfaces(building: Building) -> list[Surface]:
    P, h = building.footprint, building.height
    n = len(P)
    out = []
    for i in range(n):
        (x1, y1), (x2, y2) = P[i], P[(i + 1) % n]
        w = math.hypot(x2 - x1, y2 - y1)
        corners = ((x1, y1, 0.0), (x2, y2, 0.0), (x2, y2, h), (x1, y1, h))
        out.append(Surface("facade", corners, building.id, w * h))
    roof = tuple((x, y, h) for x, y in P)
    out.append(Surface("roof", roof, building.id, building.area))
    return out


def camera_footprint(camera: CameraSpec) -> Footprint2D:
    fw = 2.0 * camera.standoff * math.tan(math.radians(camera.fov_width) / 2.0)
    fh = 2.0 * camera.standoff * math.tan(math.radians(camera.fov_height) / 2.0)
    return Footprint2D(fw, fh)


def area_law_count(surface_area: float, footprint: Footprint2D) -> int:
    """Number of camera footprints needed to cover an area."""
    return math.ceil(surface_area / footprint.area - 1e-12)


def _cells(length: float, size: float) -> int:
    return max(1, math.ceil(length / size - 1e-9))


def _facade_viewpoints(surface: Surface, camera: CameraSpec, fp: Footprint2D, first_id: int):
    p = surface.points
    base, top = p[0], p[3]
    along = p[1] - p[0]
    width = float(np.linalg.norm(along))
    height = float(top[2] - base[2])
    u = along / width
    cols, rows = _cells(width, fp.width), _cells(height, fp.height)
    cw, ch = width / cols, height / rows
    normal = surface.normal
    bearing = compass_bearing(-normal[0], -normal[1])
    # cell corner grid, row-major from the bottom-left of the wall
    S = np.arange(cols + 1) * cw
    Z = base[2] + np.arange(rows + 1) * ch
    G = base[None, None, :2] + S[None, :, None] * u[None, None, :2]
    G = np.concatenate([np.broadcast_to(G, (rows + 1, cols + 1, 2)),
                        np.broadcast_to(Z[:, None, None], (rows + 1, cols + 1, 1))], axis=2)
    C = ((G[:-1, :-1] + G[1:, 1:]) / 2.0 + camera.standoff * normal).tolist()
    G = G.tolist()
    out = []
    bid = surface.building_id
    for r in range(rows):
        for c in range(cols):
            corners = (tuple(G[r][c]), tuple(G[r][c + 1]), tuple(G[r + 1][c + 1]), tuple(G[r + 1][c]))
            patch = Surface("facade", corners, bid, cw * ch)
            out.append(Viewpoint(first_id + len(out), tuple(C[r][c]), bearing, 0.0, patch, bid))
    return out, cols * rows


def _roof_layout(L1: float, L2: float, fp: Footprint2D):
    """Pick which rectangle axis carries the camera width (fewest cells)."""
    a = (_cells(L1, fp.width), _cells(L2, fp.height), False)
    b = (_cells(L1, fp.height), _cells(L2, fp.width), True)
    return a if a[0] * a[1] <= b[0] * b[1] else b


def _is_convex(poly) -> bool:
    e = np.roll(poly, -1, axis=0) - poly
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool((cross >= -1e-9).all() or (cross <= 1e-9).all())


def _inside_convex(Q, poly, tol):
    """Which points lie inside or on a convex CCW polygon."""
    e = np.roll(poly, -1, axis=0) - poly
    rel = Q[:, None, :] - poly[None, :, :]
    cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
    return (cross >= -tol * np.linalg.norm(e, axis=1)[None, :]).all(axis=1)


def _roof_viewpoints(surface: Surface, camera: CameraSpec, fp: Footprint2D, first_id: int):
    poly = surface.points[:, :2]
    h = float(surface.points[0, 2])
    origin, u, v, L1, L2 = min_area_rectangle(poly)
    n1, n2, swapped = _roof_layout(L1, L2, fp)
    local = np.column_stack([(poly - origin) @ u, (poly - origin) @ v])
    if signed_area(local) < 0:
        local = local[::-1]
    d1, d2 = L1 / n1, L2 / n2
    # the camera's height axis (forward in the image) runs along the f_h axis
    forward = u if swapped else v
    bearing = compass_bearing(*forward) % 180.0
    # cells entirely inside a convex roof need no clipping
    I, J = np.meshgrid(np.arange(n1), np.arange(n2))
    I, J = I.ravel(), J.ravel()
    whole = np.zeros(len(I), dtype=bool)
    if _is_convex(local):
        ok = [_inside_convex(np.column_stack([(I + a) * d1, (J + b) * d2]), local, 1e-9)
              for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]
        whole = ok[0] & ok[1] & ok[2] & ok[3]
    ring = [tuple(p) for p in local.tolist()]
    # world coordinates of the cell corner lattice, G[i][j] at (i d1, j d2)
    S, T = np.arange(n1 + 1) * d1, np.arange(n2 + 1) * d2
    G = origin[None, None] + S[:, None, None] * u[None, None] + T[None, :, None] * v[None, None]
    C = ((G[:-1, :-1] + G[1:, 1:]) / 2.0).tolist()
    G = G.tolist()
    out = []
    min_area = TOL * d1 * d2
    bid = surface.building_id
    for i, j, w in zip(I.tolist(), J.tolist(), whole.tolist()):
        if not w:
            clipped = _clip_box(ring, i * d1, (i + 1) * d1, j * d2, (j + 1) * d2)
            if len(clipped) < 3 or abs(_shoelace(clipped)) <= min_area:
                continue
        corners = tuple((G[a][b][0], G[a][b][1], h) for a, b in ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)))
        patch = Surface("roof", corners, bid, d1 * d2)
        pos = (C[i][j][0], C[i][j][1], h + camera.standoff)
        out.append(Viewpoint(first_id + len(out), pos, bearing, 90.0, patch, bid))
    return out, len(out)


def generate_viewpoints(surface: Surface, camera: CameraSpec, first_id: int = 0) -> list[Viewpoint]:
    """Tile a surface with camera patches and return one viewpoint per patch.

    Facades use a ``ceil(w/f_w) x ceil(h/f_h)`` grid stretched to fit the
    facade exactly.  Roofs use the same rule over the minimum-area bounding
    rectangle, keeping only cells that overlap the roof.  Whenever the grid
    needs more patches than the area law ``ceil(a_s/a_f)`` both counts are
    logged at INFO level.
    """
    if surface.area < TOL:
        log.warning("surface of building %s (%s) below tolerance, no viewpoints",
                    surface.building_id, surface.kind,
                    extra={"building_id": surface.building_id, "kind": surface.kind})
        return []
    fp = camera_footprint(camera)
    if surface.kind == "roof":
        vps, count = _roof_viewpoints(surface, camera, fp, first_id)
    else:
        vps, count = _facade_viewpoints(surface, camera, fp, first_id)
    law = area_law_count(surface.area, fp)
    if count != law:
        log.info("building %s %s: grid needs %d viewpoints, area law gives %d",
                 surface.building_id, surface.kind, count, law,
                 extra={"building_id": surface.building_id, "kind": surface.kind,
                        "grid_count": count, "law_count": law})
    return vps


def inside_clearance(points, building: Building, clearance: float = CLEARANCE) -> np.ndarray:
    """True where a point is inside the prism grown by ``clearance``.

    The grown prism is every point within ``clearance`` of the footprint
    horizontally and below ``height + clearance``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = distance_to_polygon(pts[:, :2], building.polygon)
    return (d <= clearance) & (pts[:, 2] <= building.height + clearance)


def filter_occluded_viewpoints(viewpoints, buildings, clearance: float = CLEARANCE) -> list[Viewpoint]:
    if not viewpoints:
        return []
    pts = np.array([v.position for v in viewpoints])
    bad = np.zeros(len(viewpoints), dtype=bool)
    for b in buildings:
        bad |= inside_clearance(pts, b, clearance)
    return [v for v, drop in zip(viewpoints, bad) if not drop]


def building_viewpoints(buildings, camera: CameraSpec, clearance: float = CLEARANCE):
    """Viewpoints for every building, filtered, keyed by building id.

    Ids are assigned sequentially across all buildings before filtering, so
    retained viewpoints keep their original ids.
    """
    result = {}
    next_id = 0
    for b in buildings:
        vps = []
        for s in build_surfaces(b):
            got = generate_viewpoints(s, camera, first_id=next_id)
            next_id += len(got)
            vps.extend(got)
        result[b.id] = filter_occluded_viewpoints(vps, buildings, clearance)
    return result
