import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanpatrol.pathplan.matching import max_weight_matching, min_weight_perfect_matching

from oracles import min_matching_weight, perfect_matchings, random_graph_metric, random_metric


def weight(pairs, W):
    return sum(W[a][b] for a, b in pairs)


def test_two_nodes():
    assert min_weight_perfect_matching([0, 1], [[0, 3], [3, 0]]) == {(0, 1)}


def test_line_of_four():
    x = [0, 1, 10, 11]
    W = [[abs(a - b) for b in x] for a in x]
    pairs = min_weight_perfect_matching(range(4), W)
    assert pairs == {(0, 1), (2, 3)}
    assert weight(pairs, W) == 2


def test_odd_count_rejected():
    with pytest.raises(ValueError, match="even"):
        min_weight_perfect_matching(range(3), np.zeros((3, 3)))


def test_non_finite_rejected():
    W = np.ones((4, 4))
    W[0, 1] = W[1, 0] = np.inf
    with pytest.raises(ValueError, match="finite"):
        min_weight_perfect_matching(range(4), W)


def test_callable_weights_and_labels():
    pts = {"a": 0.0, "b": 5.0, "c": 1.0, "d": 6.0}
    pairs = min_weight_perfect_matching(list(pts), lambda u, v: abs(pts[u] - pts[v]))
    assert pairs == {("a", "c"), ("b", "d")}


def test_enumeration_oracle_counts():
    assert sum(1 for _ in perfect_matchings(range(10))) == 945


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_equals_enumeration(n):
    rng = np.random.default_rng(100 + n)
    for trial in range(15 if n < 10 else 6):
        W = random_metric(n, rng) if trial % 2 else random_graph_metric(n, rng)
        pairs = min_weight_perfect_matching(range(n), W)
        assert sorted(v for p in pairs for v in p) == list(range(n))
        assert weight(pairs, W) == pytest.approx(min_matching_weight(W), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12).map(lambda k: 2 * k), st.integers(0, 2**32 - 1))
def test_agrees_with_networkx(n, seed):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0, 50, size=(n, n))
    W = (W + W.T) / 2
    G = nx.Graph()
    for i in range(n):
        for j in range(i + 1, n):
            G.add_edge(i, j, weight=W[i, j])
    ref = nx.min_weight_matching(G)
    ours = min_weight_perfect_matching(range(n), W)
    assert weight(ours, W) == pytest.approx(sum(W[a][b] for a, b in ref), abs=1e-6)


def test_max_weight_matching_small_graph():
    # path 0-1-2-3 with heavier outer edges
    mate = max_weight_matching([(0, 1, 5), (1, 2, 6), (2, 3, 5)])
    assert mate == [1, 0, 3, 2]
    # without the cardinality requirement the single heavy edge wins
    mate = max_weight_matching([(0, 1, 1), (1, 2, 10), (2, 3, 1)])
    assert mate == [-1, 2, 1, -1]
