"""Obstacle-aware distances between 3D points among prism buildings.

The model is a 2.5D reduction of a 3D visibility graph.  Each footprint is
grown by the clearance radius; a building blocks a query unless both
endpoints fly above its grown top.  When the straight 3D segment is clear the
distance is Euclidean; otherwise the horizontal path is the shortest route in
the 2D visibility graph of the blocking footprints, and the altitude is
interpolated linearly along it.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import floyd_warshall

from ..geometry import CLEARANCE, Building, distance_to_polygon, points_in_polygon

EPS = 1e-9
NODE_MARGIN = 1e-3


class ObstacleError(ValueError):
    """A query endpoint lies inside a grown building."""

    def __init__(self, point, building_id):
        super().__init__(f"point {tuple(round(float(c), 3) for c in point)} is inside "
                         f"the clearance region of building {building_id}")
        self.point = point
        self.building_id = building_id


# ----------------------------------------------------------------------------
# segment / grown-polygon predicates
# ----------------------------------------------------------------------------

def _point_seg_dist(P, A, B):
    AB = B - A
    denom = np.maximum((AB * AB).sum(-1), 1e-300)
    t = np.clip(((P - A) * AB).sum(-1) / denom, 0.0, 1.0)
    return np.sqrt(((P - (A + t[..., None] * AB)) ** 2).sum(-1))


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def seg_seg_distance(A, B, C, D):
    """Broadcast distance between segments AB and CD."""
    d1, d2 = _cross(C, D, A), _cross(C, D, B)
    d3, d4 = _cross(A, B, C), _cross(A, B, D)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    dist = np.minimum(np.minimum(_point_seg_dist(A, C, D), _point_seg_dist(B, C, D)),
                      np.minimum(_point_seg_dist(C, A, B), _point_seg_dist(D, A, B)))
    return np.where(crossing, 0.0, dist)


def segments_clear(A, B, poly, radius):
    """Vectorised 2D test: which segments A[i]-B[i] avoid the grown polygon.

    Requires ``radius > 0``; a segment is blocked when it passes strictly
    closer than ``radius`` to the polygon or starts or ends inside it.
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    E0 = poly[None, :, :]
    E1 = np.roll(poly, -1, axis=0)[None, :, :]
    d = seg_seg_distance(A[:, None, :], B[:, None, :], E0, E1).min(axis=1)
    inside = points_in_polygon(A, poly) | points_in_polygon(B, poly)
    return (d >= radius - 1e-7) & ~inside


def _line_disc(a, ab, c, r):
    f = a - c
    qa = ab @ ab
    qb = 2 * f @ ab
    qc = f @ f - r * r
    disc = qb * qb - 4 * qa * qc
    if qa < 1e-300 or disc <= 0:
        return None
    s = math.sqrt(disc)
    return (-qb - s) / (2 * qa), (-qb + s) / (2 * qa)


def _line_strip(a, ab, p, q, r):
    """Parameter interval of the line a + t*ab inside the rectangle around pq."""
    e = q - p
    L = math.hypot(*e)
    if L < 1e-12:
        return None
    u = e / L
    n = np.array([-u[1], u[0]])
    lo, hi = -math.inf, math.inf
    for axis, vmin, vmax in ((u, 0.0, L), (n, -r, r)):
        x0 = (a - p) @ axis
        dx = ab @ axis
        if abs(dx) < 1e-15:
            if not vmin < x0 < vmax:
                return None
            continue
        t1, t2 = (vmin - x0) / dx, (vmax - x0) / dx
        if t1 > t2:
            t1, t2 = t2, t1
        lo, hi = max(lo, t1), min(hi, t2)
    return (lo, hi) if lo < hi else None


def blocked_intervals(a, b, poly, radius):
    """Sub-intervals of t in [0, 1] where a + t(b-a) lies in the grown polygon.

    Works for ``radius == 0`` (plain footprint).  Touching contacts are
    dropped.
    """
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    P = np.asarray(poly, dtype=float)
    raw = []
    # interior of the footprint
    ts = [0.0, 1.0]
    for i in range(len(P)):
        p, q = P[i], P[(i + 1) % len(P)]
        e = q - p
        den = ab[0] * e[1] - ab[1] * e[0]
        if abs(den) < 1e-15:
            continue
        w = p - a
        t = (w[0] * e[1] - w[1] * e[0]) / den
        s = (w[0] * ab[1] - w[1] * ab[0]) / den
        if 0.0 <= t <= 1.0 and -1e-12 <= s <= 1 + 1e-12:
            ts.append(t)
    ts.sort()
    mids = [(ts[i] + ts[i + 1]) / 2 for i in range(len(ts) - 1) if ts[i + 1] - ts[i] > 1e-12]
    if mids:
        inside = points_in_polygon(a + np.outer(mids, ab), P)
        k = 0
        for i in range(len(ts) - 1):
            if ts[i + 1] - ts[i] > 1e-12:
                if inside[k]:
                    raw.append((ts[i], ts[i + 1]))
                k += 1
    if radius > 0:
        for i in range(len(P)):
            p, q = P[i], P[(i + 1) % len(P)]
            for iv in (_line_strip(a, ab, p, q, radius), _line_disc(a, ab, p, radius)):
                if iv is not None:
                    raw.append(iv)
    clipped = sorted((max(0.0, lo), min(1.0, hi)) for lo, hi in raw if hi > 0 and lo < 1)
    merged = []
    for lo, hi in clipped:
        if hi - lo <= EPS:
            continue
        if merged and lo <= merged[-1][1] + 1e-12:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def segment_blocked_3d(a, b, building: Building, radius: float) -> bool:
    """Does the straight 3D segment enter the grown prism of ``building``?"""
    top = building.height + radius
    za, zb = a[2], b[2]
    if min(za, zb) >= top - EPS:
        return False
    for lo, hi in blocked_intervals(a[:2], b[:2], building.polygon, radius):
        z0 = za + lo * (zb - za)
        z1 = za + hi * (zb - za)
        if min(z0, z1) < top - EPS:
            return True
    return False


def _mitre_nodes(poly, offset):
    """Offset points of the convex vertices of a CCW polygon."""
    n = len(poly)
    out = []
    for i in range(n):
        prev, cur, nxt = poly[i - 1], poly[i], poly[(i + 1) % n]
        e1, e2 = cur - prev, nxt - cur
        if e1[0] * e2[1] - e1[1] * e2[0] <= 1e-12:
            continue
        n1 = np.array([e1[1], -e1[0]]) / np.linalg.norm(e1)
        n2 = np.array([e2[1], -e2[0]]) / np.linalg.norm(e2)
        out.append(cur + offset * (n1 + n2) / (1.0 + n1 @ n2))
    return out


# ----------------------------------------------------------------------------
# oracle
# ----------------------------------------------------------------------------

class _Graph:
    """Visibility graph over the grown footprints of one obstacle set."""

    def __init__(self, polys, radius, nodes):
        self.polys = polys
        self.radius = radius
        self._boxes = [(P.min(axis=0), P.max(axis=0)) for P in polys]
        keep = np.ones(len(nodes), dtype=bool)
        if len(nodes):
            for P in polys:
                keep &= distance_to_polygon(nodes, P) > radius
        self.nodes = nodes[keep]
        self._reach_cache = {}
        N = len(self.nodes)
        W = np.full((N, N), np.inf)
        if N:
            iu = np.triu_indices(N, 1)
            ok = self.visible(self.nodes[iu[0]], self.nodes[iu[1]])
            lengths = np.linalg.norm(self.nodes[iu[0]] - self.nodes[iu[1]], axis=1)
            W[iu[0][ok], iu[1][ok]] = lengths[ok]
            W[iu[1][ok], iu[0][ok]] = lengths[ok]
            np.fill_diagonal(W, 0.0)
            self.dist, self.pred = floyd_warshall(W, directed=False, return_predecessors=True)
        else:
            self.dist = W
            self.pred = np.zeros((0, 0), dtype=int)

    def visible(self, A, B):
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        ok = np.ones(len(A), dtype=bool)
        lo = np.minimum(A, B) - self.radius
        hi = np.maximum(A, B) + self.radius
        for P, (plo, phi) in zip(self.polys, self._boxes):
            near = np.nonzero(np.all(hi >= plo, axis=1) & np.all(lo <= phi, axis=1))[0]
            if len(near):
                ok[near] &= segments_clear(A[near], B[near], P, self.radius)
        return ok

    def reach(self, p2):
        """Straight-line distance from p2 to each visible node (inf if hidden)."""
        key = (float(p2[0]), float(p2[1]))
        got = self._reach_cache.get(key)
        if got is None:
            N = len(self.nodes)
            got = np.where(self.visible(np.repeat(p2[None], N, 0), self.nodes),
                           np.linalg.norm(self.nodes - p2, axis=1), np.inf)
            if len(self._reach_cache) < 100_000:
                self._reach_cache[key] = got
        return got

    def node_path(self, i, j):
        seq = [j]
        while seq[-1] != i:
            seq.append(self.pred[i, seq[-1]])
        return seq[::-1]

    def shortest(self, a2, b2):
        """Horizontal shortest path between two free points: (length, polyline)."""
        if self.visible(a2[None], b2[None])[0]:
            return float(np.linalg.norm(b2 - a2)), [a2, b2]
        N = len(self.nodes)
        if N == 0:
            return math.inf, None
        va, vb = self.reach(a2), self.reach(b2)
        total = va[:, None] + self.dist + vb[None, :]
        k = int(np.argmin(total))
        i, j = divmod(k, N)
        if not np.isfinite(total[i, j]):
            return math.inf, None
        pts = [a2] + [self.nodes[m] for m in self.node_path(i, j)] + [b2]
        return float(total[i, j]), pts


class DistanceOracle:
    """Collision-free path lengths and routes among prism buildings."""

    def __init__(self, buildings, clearance: float = CLEARANCE):
        self.buildings = list(buildings)
        self.clearance = float(clearance)
        self._polys = [b.polygon for b in self.buildings]
        self._tops = np.array([b.height + self.clearance for b in self.buildings])
        self._nodes = [np.array(_mitre_nodes(P, self.clearance + NODE_MARGIN)).reshape(-1, 2)
                       for P in self._polys]
        lo = np.array([P.min(axis=0) for P in self._polys]).reshape(-1, 2) - self.clearance
        hi = np.array([P.max(axis=0) for P in self._polys]).reshape(-1, 2) + self.clearance
        self._bbox = (lo, hi)
        self._graph = lru_cache(maxsize=None)(self._make_graph)
        self._class_cache = {}

    def __getstate__(self):
        st = dict(self.__dict__)
        st.pop("_graph")
        st["_class_cache"] = {}
        return st

    def __setstate__(self, st):
        self.__dict__.update(st)
        self._graph = lru_cache(maxsize=None)(self._make_graph)

    def _make_graph(self, members):
        polys = [self._polys[j] for j in members]
        nodes = np.concatenate([self._nodes[j] for j in members]) if members else np.zeros((0, 2))
        return _Graph(polys, self.clearance, nodes)

    def _classify(self, p):
        """Indices of buildings whose grown footprint contains p horizontally.

        Raises when p is inside a grown prism.
        """
        key = (float(p[0]), float(p[1]), float(p[2]))
        got = self._class_cache.get(key)
        if got is None:
            got = self._classify_uncached(p)
            if len(self._class_cache) < 100_000:
                self._class_cache[key] = got
        return got

    def _classify_uncached(self, p):
        lo, hi = self._bbox
        near = np.nonzero(np.all(lo <= p[:2], axis=1) & np.all(hi >= p[:2], axis=1))[0]
        over = [j for j in near if distance_to_polygon(p[None, :2], self._polys[j])[0] < self.clearance - EPS]
        over = np.array(over, dtype=int)
        for j in over:
            if p[2] < self._tops[j] - EPS:
                raise ObstacleError(p, self.buildings[j].id)
        return set(over.tolist())

    def _candidates(self, a, b):
        lo, hi = self._bbox
        smin = np.minimum(a[:2], b[:2])
        smax = np.maximum(a[:2], b[:2])
        hit = np.all(hi >= smin, axis=1) & np.all(lo <= smax, axis=1)
        hit &= self._tops > min(a[2], b[2]) + EPS
        return np.nonzero(hit)[0]

    def straight_clear(self, a, b) -> bool:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return not any(segment_blocked_3d(a, b, self.buildings[j], self.clearance)
                       for j in self._candidates(a, b))

    def _solve(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        above = self._classify(a) | self._classify(b)
        if self.straight_clear(a, b):
            return float(np.linalg.norm(b - a)), [a, b]
        zmin = min(a[2], b[2])
        members = tuple(j for j in range(len(self.buildings))
                        if zmin < self._tops[j] - EPS and j not in above)
        L2, pts2 = self._graph(members).shortest(a[:2], b[:2])
        if pts2 is None:
            return math.inf, None
        return self._lift(a, b, pts2, above)

    def _lift(self, a, b, pts2, above):
        """Altitude profile along a horizontal path.

        Buildings an endpoint hovers over are not avoided horizontally, so the
        path must stay above their grown tops wherever it crosses them.  The
        shortest such profile is the taut string: the upper convex hull of the
        endpoints and the corners of those height steps.
        """
        P = np.array(pts2, dtype=float)
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        L2 = float(cum[-1])
        knots = [(0.0, float(a[2])), (L2, float(b[2]))]
        for j in above:
            top = float(self._tops[j])
            for k in range(len(seg)):
                if seg[k] <= 0:
                    continue
                for lo, hi in blocked_intervals(P[k], P[k + 1], self._polys[j], self.clearance):
                    # an endpoint already clears whatever it hovers over
                    for t in (lo, hi):
                        sk = cum[k] + t * seg[k]
                        if EPS < sk < L2 - EPS:
                            knots.append((sk, top))
        hull = _upper_hull(knots)
        hs = np.array([h[0] for h in hull])
        hz = np.array([h[1] for h in hull])
        length = float(np.hypot(np.diff(hs), np.diff(hz)).sum())
        # route vertices: the horizontal bends plus the hull breakpoints
        ss = np.unique(np.concatenate([cum, hs]))
        xy = np.column_stack([np.interp(ss, cum, P[:, 0]), np.interp(ss, cum, P[:, 1])])
        zz = np.interp(ss, hs, hz)
        route = [np.array([x, y, z]) for (x, y), z in zip(xy, zz)]
        route[0], route[-1] = a, b
        return length, route

    def distance(self, a, b) -> float:
        return self._solve(a, b)[0]

    def route(self, a, b) -> list:
        """Polyline of 3D points from a to b (inclusive)."""
        length, pts = self._solve(a, b)
        if pts is None:
            raise ObstacleError(a, -1)
        return pts


def _upper_hull(points):
    pts = sorted(set(points))
    out = []
    for p in pts:
        while len(out) >= 2:
            (x1, y1), (x2, y2) = out[-2], out[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                out.pop()
            else:
                break
        out.append(p)
    return out


def obstacle_distance(a, b, buildings, clearance: float = CLEARANCE) -> float:
    """Length of the collision-free path between two points."""
    pa = np.asarray(getattr(a, "position", a), dtype=float)
    pb = np.asarray(getattr(b, "position", b), dtype=float)
    return DistanceOracle(buildings, clearance).distance(pa, pb)


class DistanceTable:
    """Pairwise oracle distances over a point set, closed under shortest paths.

    The raw oracle is not guaranteed metric (over-roof shortcuts depend on the
    endpoint heights), so the table is replaced by its shortest-path closure;
    a closed entry's route is the concatenation of its hop routes.
    """

    def __init__(self, oracle: DistanceOracle, points):
        self.oracle = oracle
        self.points = [np.asarray(p, dtype=float) for p in points]
        n = len(self.points)
        raw = np.zeros((n, n))
        self._routes = {}
        for i in range(n):
            for j in range(i + 1, n):
                d, pts = oracle._solve(self.points[i], self.points[j])
                raw[i, j] = raw[j, i] = d
                if pts is not None:
                    self._routes[i, j] = pts
        if not np.all(np.isfinite(raw)):
            bad = np.argwhere(~np.isfinite(raw))[0]
            raise ValueError(f"no collision-free path between points {bad[0]} and {bad[1]}")
        self.raw = raw
        if n:
            self.matrix, self._pred = floyd_warshall(raw, directed=False, return_predecessors=True)
        else:
            self.matrix, self._pred = raw, np.zeros((0, 0), dtype=int)

    def __len__(self):
        return len(self.points)

    def hops(self, i, j):
        seq = [j]
        while seq[-1] != i:
            seq.append(int(self._pred[i, seq[-1]]))
        return seq[::-1]

    def _hop_route(self, i, j):
        if i < j:
            return self._routes[i, j]
        return self._routes[j, i][::-1]

    def route(self, i, j) -> list:
        if i == j:
            return [self.points[i]]
        seq = self.hops(i, j)
        out = [self.points[i]]
        for u, v in zip(seq, seq[1:]):
            out.extend(self._hop_route(u, v)[1:])
        return out
