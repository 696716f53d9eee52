from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, path_graph, random_graph
from ftdist.errors import GraphError
from ftdist.graph import (
    INF,
    Demand,
    Edge,
    Graph,
    MovingCut,
    NodeWeighting,
    apply_cut,
    demand_stats,
    format_graph,
    lexmax_shortest_path,
    parse_graph,
    sssp,
)
from oracles import floyd_warshall, lexmax_by_enumeration, path_length, simple_paths


def test_sssp_unit_path():
    assert sssp(path_graph(3), 0) == [0, 1, 2]


def test_sssp_single_vertex():
    assert sssp(Graph(1, ()), 0) == [0]


def test_sssp_unreachable_is_inf():
    g = Graph(3, (Edge(0, 0, 1, 2),))
    assert sssp(g, 0) == [0, 2, INF]


def test_sssp_matches_floyd_warshall_on_500_graphs():
    rng = random.Random(1)
    for _ in range(500):
        n = rng.randint(1, 12)
        g = random_graph(rng, n, rng.randint(0, 20) if n > 1 else 0)
        fw = floyd_warshall(g.n, g.edges)
        for s in range(g.n):
            assert sssp(g, s) == fw[s]


def test_graph_rejects_self_loop_and_bad_lengths():
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 1, 1, 1),))
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 0, 1, 0),))
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 0, 1, 1, Fraction(1, 2)),))
    with pytest.raises(GraphError):
        Graph(2, (Edge(0, 0, 1, 1), Edge(0, 0, 1, 2)))


def test_apply_cut_zero_cut_keeps_lengths():
    g = path_graph(4, 3)
    assert apply_cut(g, MovingCut(4), 4) == g


def test_apply_cut_full_unit_edge():
    g = path_graph(2, 1)
    assert apply_cut(g, MovingCut(4, {0: 1}), 4).edges[0].length == 5


def test_apply_cut_half_value():
    g = path_graph(2, 3)
    assert apply_cut(g, MovingCut(4, {0: Fraction(1, 2)}), 4).edges[0].length == 5


def test_moving_cut_rejects_off_grid_values():
    with pytest.raises(GraphError):
        MovingCut(4, {0: Fraction(1, 3)})
    with pytest.raises(GraphError):
        MovingCut(4, {0: Fraction(5, 4)})


@st.composite
def graph_with_cut(draw):
    g = draw(graphs(n_min=2))
    h = draw(st.integers(1, 6))
    values = {e.id: Fraction(draw(st.integers(0, h)), h) for e in g.edges}
    return g, MovingCut(h, values)


@given(graph_with_cut())
def test_cut_degree_dominated_and_sums_to_twice_size(data):
    g, c = data
    deg_c = c.degree(g)
    assert deg_c <= g.degree()
    assert deg_c.total() == 2 * c.size(g)


@given(graph_with_cut(), st.integers(0, 2**16))
def test_apply_cut_is_additive(data, seed):
    g, c = data
    rng = random.Random(seed)
    first = {eid: Fraction(rng.randint(0, int(x * c.h)), c.h) for eid, x in c.items()}
    second = {eid: x - first[eid] for eid, x in c.items()}
    c1, c2 = MovingCut(c.h, first), MovingCut(c.h, second)
    assert apply_cut(apply_cut(g, c1, c.h), c2, c.h) == apply_cut(g, c1 + c2, c.h)


def test_lexmax_unique_path():
    g = Graph(3, (Edge(0, 0, 1, 1), Edge(1, 1, 2, 1), Edge(2, 0, 2, 5)))
    assert lexmax_shortest_path(g, 0, 2) == (0, 1)


def test_lexmax_four_cycle_prefers_lowest_edge_id():
    # 0-1-2 via edges 0,1 and 0-3-2 via edges 2,3: both length 2
    g = Graph(4, (Edge(0, 0, 1, 1), Edge(1, 1, 2, 1), Edge(2, 2, 3, 1), Edge(3, 3, 0, 1)))
    assert lexmax_shortest_path(g, 0, 2) == (0, 1)
    assert lexmax_shortest_path(g, 2, 0) == (1, 0)
    assert lexmax_by_enumeration(g.n, g.edges, 0, 2) == (0, 1)


def test_lexmax_identity_and_unreachable():
    g = Graph(3, (Edge(0, 0, 1, 1),))
    assert lexmax_shortest_path(g, 1, 1) == ()
    assert lexmax_shortest_path(g, 0, 2) is None


@given(graphs(n_max=7, m_max=10))
def test_lexmax_matches_enumeration_and_is_subpath_closed(g):
    for u in range(g.n):
        for v in range(g.n):
            path = lexmax_shortest_path(g, u, v)
            expected = lexmax_by_enumeration(g.n, g.edges, u, v)
            assert (path is None) == (expected is None)
            if path is None:
                continue
            assert set(path) == set(expected)
            assert path_length(g.edges, path) == sssp(g, u)[v]
            # every suffix is itself the lex-max path between its endpoints
            x = u
            for k, eid in enumerate(path):
                x = g.edge_by_id[eid].other(x)
                suffix = lexmax_shortest_path(g, x, v)
                assert set(suffix) == set(path[k + 1 :])


def test_demand_stats_zero_cut():
    g = path_graph(3)
    assert demand_stats(MovingCut(1), Demand({(0, 2): 1}), g, 2) == (0, INF)


def test_demand_stats_single_edge():
    g = path_graph(2)
    sep, sparsity = demand_stats(MovingCut(1, {0: 1}), Demand({(0, 1): 1}), g, 1)
    assert (sep, sparsity) == (1, 1)


def test_demand_stats_matches_pair_check():
    rng = random.Random(5)
    g = random_graph(rng, 5, 7, connected=True)
    c = MovingCut(2, {e.id: Fraction(rng.randint(0, 2), 2) for e in g.edges})
    d = Demand({(u, v): rng.randint(1, 3) for u in range(5) for v in range(5) if u != v})
    cut_lengths = {e.id: e.length + int(2 * c(e.id)) for e in g.edges}
    fw = floyd_warshall(5, [Edge(e.id, e.u, e.v, cut_lengths[e.id]) for e in g.edges])
    expected = sum(x for (u, v), x in d.items() if fw[u][v] > 3)
    sep, sparsity = demand_stats(c, d, g, 3)
    assert sep == expected
    assert sparsity == (c.size(g) / expected if expected else INF)


def test_node_weighting_order_and_mass():
    a = NodeWeighting({0: 1, 1: Fraction(1, 2)})
    b = NodeWeighting({0: 2, 1: Fraction(1, 2), 2: 0})
    assert a <= b and not b <= a
    assert b.mass([0, 2]) == 2
    assert (b - a) == NodeWeighting({0: 1})


def test_graph_text_round_trip():
    g = random_graph(random.Random(3), 6, 9)
    assert parse_graph(format_graph(g)) == g


@pytest.mark.parametrize(
    "text",
    ["", "2 1\n", "2 1 3\n0 0 1 4 1 1\n", "2 2 3\n0 0 1 1 1 1\n", "2 1 3\n0 0 1 x 1 1\n", "2 1 3\n0 0 0 1 1 1\n"],
)
def test_parse_graph_rejects_malformed(text):
    with pytest.raises(GraphError):
        parse_graph(text)


def test_paths_oracle_sanity():
    g = path_graph(4)
    assert simple_paths(g.n, g.edges, 0, 3) == [(0, 1, 2)]
