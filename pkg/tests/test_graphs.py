import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphsplit.errors import InvalidInputError
from graphsplit.graphs import (
    WeightedGraph,
    build_topology,
    degree_matrix,
    edge_offset,
    graph_from_dict,
    incidence,
    laplacian,
    load_graph,
    save_graph,
    subgraph,
)


def test_topology_examples():
    assert build_topology("sequential", 3).edges == ((1, 2, 1.0), (2, 3, 1.0))
    assert build_topology("star_last", 4, 2.0).edges == ((1, 4, 2.0), (2, 4, 2.0), (3, 4, 2.0))
    g = build_topology("complete", 3)
    assert g.m == 3 and all(w == 1.0 for *_, w in g.edges)


@pytest.mark.parametrize("kind,n,m", [("ring", 6, 6), ("sequential", 6, 5), ("star_first", 6, 5),
                                      ("star_last", 6, 5), ("complete", 6, 15)])
def test_topology_edge_counts(kind, n, m):
    g = build_topology(kind, n)
    assert g.m == m and g.is_connected()


def test_weight_callable():
    g = build_topology("sequential", 4, lambda i, j: i + j)
    assert g.weight(3, 2) == 5.0


def test_incidence_examples():
    g2 = build_topology("sequential", 2)
    np.testing.assert_array_equal(incidence(g2), [[1.0], [-1.0]])
    g3 = build_topology("sequential", 3)
    np.testing.assert_array_equal(incidence(g3), [[1, 0], [-1, 1], [0, -1]])
    np.testing.assert_array_equal(incidence(subgraph(build_topology("sequential", 2, 4.0), "sequential")),
                                  [[2.0], [-2.0]])


def test_laplacian_examples():
    np.testing.assert_array_equal(laplacian(build_topology("complete", 3)), 3 * np.eye(3) - np.ones((3, 3)))
    np.testing.assert_array_equal(laplacian(build_topology("sequential", 2, 4.0)), [[4, -4], [-4, 4]])
    np.testing.assert_array_equal(laplacian(build_topology("sequential", 3)),
                                  [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_degree_examples():
    np.testing.assert_array_equal(degree_matrix(build_topology("complete", 3)), 2 * np.eye(3))
    np.testing.assert_array_equal(np.diag(degree_matrix(build_topology("star_last", 4, 2.0))), [2, 2, 2, 6])
    np.testing.assert_array_equal(np.diag(degree_matrix(build_topology("sequential", 3))), [1, 2, 1])


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 8))
    order = draw(st.permutations(range(1, n + 1)))
    edges = {}
    for k in range(1, n):
        parent = order[draw(st.integers(0, k - 1))]
        a, b = sorted((order[k], parent))
        edges[(a, b)] = draw(st.floats(0.1, 5.0))
    extra = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), max_size=6))
    for a, b in extra:
        if a != b:
            edges.setdefault(tuple(sorted((a, b))), draw(st.floats(0.1, 5.0)))
    return WeightedGraph(n, [(a, b, w) for (a, b), w in edges.items()])


@given(connected_graphs(), st.data())
def test_laplacian_equals_incidence_product_for_any_orientation(g, data):
    flip = data.draw(st.lists(st.booleans(), min_size=g.m, max_size=g.m))
    M = incidence(g, flip)
    np.testing.assert_allclose(M @ M.T, laplacian(g), atol=1e-12)


def test_edge_offset_matches_enumeration():
    for n in (2, 5, 9):
        pairs = list(itertools.combinations(range(1, n + 1), 2))
        for i in range(1, n):
            assert edge_offset(i, n) == pairs.index((i, i + 1))


@pytest.mark.parametrize("edges", [[(1, 1, 1.0)], [(1, 2, 0.0)], [(1, 2, 1.0), (2, 1, 1.0)], [(1, 5, 1.0)]])
def test_bad_edges_rejected(edges):
    with pytest.raises(InvalidInputError):
        WeightedGraph(3, edges)


def test_subgraph_constraints():
    g = build_topology("sequential", 3, 2.0)
    with pytest.raises(InvalidInputError):
        subgraph(g, "sequential", 3.0)
    with pytest.raises(InvalidInputError):
        subgraph(g, [(1, 3)])


def test_disconnected_incidence_rejected():
    g = WeightedGraph(4, [(1, 2, 1.0), (3, 4, 1.0)])
    assert not g.is_connected()
    with pytest.raises(InvalidInputError):
        incidence(g)


def test_graph_json_roundtrip(tmp_path):
    g = build_topology("ring", 5, 1.5)
    gw = subgraph(g, "sequential", 1.0)
    save_graph(gw, tmp_path / "g.json")
    g2, gw2 = load_graph(tmp_path / "g.json")
    assert g2 == g and gw2.edges == gw.edges
    g3, gw3 = graph_from_dict(g.to_dict())
    assert gw3.edges == g.edges
