import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanpatrol.pathplan.tour import (canonical_cycle, christofides_order, christofides_tour, cycle_length,
                                       eulerian_circuit, minimum_spanning_tree)

from oracles import random_graph_metric, random_metric, tsp_optimum


def test_unit_square():
    P = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float)
    D = np.linalg.norm(P[:, None] - P[None], axis=-1)
    path = christofides_tour(range(4), D)
    assert path.length == pytest.approx(4.0)
    assert path.viewpoint_ids == (0, 1, 2, 3)


def test_single_viewpoint():
    path = christofides_tour([42], np.zeros((1, 1)))
    assert path.viewpoint_ids == (42,) and path.length == 0.0
    assert path[1] == 42


def test_two_viewpoints_out_and_back():
    path = christofides_tour([5, 3], np.array([[0, 7.0], [7.0, 0]]))
    assert path.viewpoint_ids == (3, 5)
    assert path.length == pytest.approx(14.0)


def test_non_finite_table_rejected():
    D = np.ones((3, 3))
    D[0, 2] = np.inf
    with pytest.raises(ValueError):
        christofides_tour(range(3), D)


def test_eight_random_points_within_bound():
    rng = np.random.default_rng(8)
    D = random_metric(8, rng)
    assert christofides_tour(range(8), D).length <= 1.5 * tsp_optimum(D)


def test_mst_weight_matches_scipy():
    from scipy.sparse.csgraph import minimum_spanning_tree as sp_mst
    rng = np.random.default_rng(1)
    for _ in range(10):
        D = random_metric(15, rng)
        ours = sum(D[u, v] for u, v in minimum_spanning_tree(D))
        assert ours == pytest.approx(sp_mst(D).sum())


def test_eulerian_circuit_uses_every_edge_once():
    edges = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]
    walk = eulerian_circuit(5, edges)
    assert walk[0] == walk[-1] == 0
    used = sorted(tuple(sorted(e)) for e in zip(walk, walk[1:]))
    assert used == sorted(tuple(sorted(e)) for e in edges)


def test_canonical_cycle():
    assert canonical_cycle([4, 2, 9, 1, 7]) == (1, 7, 4, 2, 9)
    assert canonical_cycle([3, 1, 2]) == (1, 2, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 9), st.integers(0, 2**32 - 1), st.booleans())
def test_within_one_and_a_half_of_optimum(n, seed, euclidean):
    rng = np.random.default_rng(seed)
    D = random_metric(n, rng) if euclidean else random_graph_metric(n, rng)
    order = christofides_order(D)
    assert sorted(order) == list(range(n))
    assert cycle_length(order, D) <= 1.5 * tsp_optimum(D)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=40, unique=True), st.integers(0, 2**32 - 1))
def test_tour_is_a_canonical_permutation(ids, seed):
    rng = np.random.default_rng(seed)
    D = random_metric(len(ids), rng, dim=3)
    path = christofides_tour(ids, D)
    assert sorted(path.viewpoint_ids) == sorted(ids)
    assert path.viewpoint_ids[0] == min(ids)
    if len(ids) > 2:
        assert path.viewpoint_ids[1] < path.viewpoint_ids[-1]
    pos = {v: i for i, v in enumerate(ids)}
    assert path.length == pytest.approx(cycle_length([pos[v] for v in path.viewpoint_ids], D))
