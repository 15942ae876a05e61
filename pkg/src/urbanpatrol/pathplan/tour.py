"""Closed patrol paths via the Christofides heuristic."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .matching import min_weight_perfect_matching


@dataclass(frozen=True)
class ClosedPath:
    """Cyclic sequence of viewpoint ids; ``length`` is the closed-loop length."""

    viewpoint_ids: tuple
    length: float

    def __len__(self):
        return len(self.viewpoint_ids)

    def __getitem__(self, index):
        """1-based lookup, matching the patrol index convention."""
        return self.viewpoint_ids[index - 1]


def minimum_spanning_tree(D):
    """Prim's algorithm on a dense matrix; returns a list of edges."""
    n = len(D)
    if n < 2:
        return []
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = D[0].astype(float).copy()
    link = np.zeros(n, dtype=int)
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        edges.append((int(link[v]), v))
        in_tree[v] = True
        closer = D[v] < best
        best = np.where(closer, D[v], best)
        link = np.where(closer, v, link)
    return edges


def eulerian_circuit(n, edges, start=0):
    """Hierholzer's algorithm on a connected multigraph with even degrees."""
    adj = defaultdict(list)
    for k, (u, v) in enumerate(edges):
        adj[u].append((v, k))
        adj[v].append((u, k))
    used = [False] * len(edges)
    stack, circuit = [start], []
    while stack:
        u = stack[-1]
        while adj[u] and used[adj[u][-1][1]]:
            adj[u].pop()
        if adj[u]:
            v, k = adj[u].pop()
            used[k] = True
            stack.append(v)
        else:
            circuit.append(stack.pop())
    return circuit[::-1]


def cycle_length(order, D):
    if len(order) < 2:
        return 0.0
    idx = np.asarray(order)
    return float(D[idx, np.roll(idx, -1)].sum())


def canonical_cycle(ids):
    """Rotate to the smallest id first, then orient toward its smaller neighbour."""
    ids = list(ids)
    if len(ids) < 3:
        k = ids.index(min(ids)) if ids else 0
        return tuple(ids[k:] + ids[:k])
    k = ids.index(min(ids))
    ids = ids[k:] + ids[:k]
    if ids[-1] < ids[1]:
        ids = [ids[0]] + ids[1:][::-1]
    return tuple(ids)


def christofides_order(D):
    """Tour over ``range(len(D))`` as a list of indices (not canonicalised)."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if not np.all(np.isfinite(D)):
        raise ValueError("distance table contains non-finite entries")
    if n <= 2:
        return list(range(n))
    mst = minimum_spanning_tree(D)
    deg = np.zeros(n, dtype=int)
    for u, v in mst:
        deg[u] += 1
        deg[v] += 1
    odd = [int(v) for v in np.nonzero(deg % 2)[0]]
    sub = D[np.ix_(odd, odd)]
    pairs = min_weight_perfect_matching(range(len(odd)), sub)
    multigraph = mst + [(odd[a], odd[b]) for a, b in sorted(pairs)]
    walk = eulerian_circuit(n, multigraph)
    seen, order = set(), []
    for v in walk:
        if v not in seen:
            seen.add(v)
            order.append(v)
    return order


def christofides_tour(viewpoints, table) -> ClosedPath:
    """Closed path over ``viewpoints`` using distances from ``table``.

    ``table`` is a :class:`DistanceTable` (or any object with a ``matrix``)
    aligned with ``viewpoints``, or a square array.
    """
    D = np.asarray(getattr(table, "matrix", table), dtype=float)
    ids = [getattr(v, "id", v) for v in viewpoints]
    if len(ids) != len(D):
        raise ValueError("distance table does not match the viewpoint list")
    if not ids:
        raise ValueError("cannot build a tour over zero viewpoints")
    order = christofides_order(D)
    pos = {vid: i for i, vid in enumerate(ids)}
    canon = canonical_cycle([ids[i] for i in order])
    return ClosedPath(canon, cycle_length([pos[v] for v in canon], D))
