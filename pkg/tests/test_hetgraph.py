import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecohen.hetgraph import (GraphError, build_graph, degree_collection,
                             neighborhood, typed_degree)
from oracles import PlainGraph


def test_toy_counts(toy):
    g = toy.graph
    assert list(g.type_sizes()) == [5, 6]
    assert g.bucket_sizes[0, 0] == 4
    assert g.bucket_sizes[1, 1] == 5
    assert g.bucket_sizes[0, 1] == g.bucket_sizes[1, 0] == 6
    assert g.n_edges == 15
    assert list(typed_degree(g, toy.index()["3"])) == [2, 1]


def test_neighborhood_is_closed(toy):
    idx = toy.index()
    nb = neighborhood(toy.graph, idx["3"])
    assert nb == {idx[v] for v in ("2", "3", "4", "6")}


def test_self_loop_counts_twice():
    g = build_graph([0, 1], [(0, 0), (0, 1)])
    assert list(g.degrees[0]) == [2, 1]
    assert g.bucket_sizes[0, 0] == 1
    assert not g.is_simple()


def test_multi_edge_detected():
    g = build_graph([0, 0], [(0, 1), (1, 0)])
    assert not g.is_simple()
    assert g.adj[0, 1] == 2


def test_bad_inputs():
    with pytest.raises(GraphError):
        build_graph([0, 1], [(0, 2)])
    with pytest.raises(GraphError):
        build_graph([0, 3], [], n_types=2)
    with pytest.raises(GraphError):
        typed_degree(build_graph([0], []), 5)


def test_immutable():
    g = build_graph([0, 1], [(0, 1)])
    with pytest.raises(AttributeError):
        g.n = 4
    with pytest.raises(ValueError):
        g.degrees[0, 0] = 7


def test_pickle_round_trip():
    g = build_graph([0, 1, 1], [(0, 1), (1, 2), (2, 2)])
    assert pickle.loads(pickle.dumps(g)) == g


edge_lists = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 2), min_size=n, max_size=n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30)))


@given(edge_lists)
@settings(max_examples=60, deadline=None)
def test_degrees_match_plain_oracle(data):
    types, edges = data
    g = build_graph(types, edges, n_types=3)
    P = PlainGraph(types, edges)
    want = np.zeros((len(types), 3), dtype=int)
    want[:, :P.K] = np.array(P.deg)
    assert np.array_equal(degree_collection(g), want)
    # handshake per bucket
    for k in range(3):
        for l in range(3):
            total = g.degrees[g.types == k, l].sum()
            assert total == (2 if k == l else 1) * g.bucket_sizes[k, l]
