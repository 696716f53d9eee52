from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, path_graph, random_graph
from ftdist.covers import NeighborhoodCover, build_cover, cover_violations, width_cap
from ftdist.errors import CorruptLabelError
from ftdist.graph import Edge, Graph, NodeWeighting
from ftdist.trees import TourRecord, build_cluster_tree, euler_tour, maximal_interval, recover_components
from oracles import euler_tour_reference, floyd_warshall, union_find_components

# Eleven-vertex sample tree; ids chosen so ascending children give the tour below.
A, B, C, D, E, F, G, H, I, K, J = range(11)  # noqa: E741
SAMPLE_CHILDREN = {A: [B, J], B: [C, D, K], D: [E, G], E: [F], G: [H, I]}
SAMPLE_TOUR = (A, B, C, B, D, E, F, E, D, G, H, G, I, G, D, B, K, B, A, J, A)
SAMPLE_MASS = NodeWeighting({A: 5, B: 5, J: 2, C: 3, D: 1, K: 0, E: 0, G: 1, F: 2, H: 3, I: 4})


def record(tour, a: NodeWeighting, v: int) -> TourRecord:
    start, end = tour.start[v], tour.end[v]
    return TourRecord(start, end, (a.mass(tour.sequence[start : end + 1]),))


# ---------------------------------------------------------------- covers


def test_cover_small_diameter_graph_single_cluster_valid():
    g = path_graph(3)
    cover = build_cover(g, 2, 2)
    assert frozenset(range(3)) in cover.clusters
    assert cover_violations(g, cover) == []


def test_cover_path_of_eight_unit_edges():
    g = path_graph(9)
    cover = build_cover(g, 1, 2)
    fw = floyd_warshall(g.n, g.edges)
    for v in range(g.n):
        ball = {x for x in range(g.n) if fw[v][x] <= 1}
        assert any(ball <= s for s in cover.clusters)
    for s in cover.clusters:
        assert max(fw[x][y] for x in s for y in s) <= 2
    assert cover.h_diam == 2


def test_cover_single_vertex():
    cover = build_cover(Graph(1, ()), 1, 2)
    assert cover.clusterings == ((frozenset({0}),),)


@given(graphs(n_max=14, m_max=22), st.integers(1, 6), st.sampled_from([2, 3, 4]))
def test_cover_exhaustive_checks(g, h_cov, s_nc):
    cover = build_cover(g, h_cov, s_nc)
    assert cover_violations(g, cover) == []
    assert cover.width <= width_cap(g.n, s_nc)


def test_cover_checks_on_fifty_vertex_graphs():
    rng = random.Random(9)
    for _ in range(5):
        g = random_graph(rng, 50, 90, connected=True)
        for h_cov in (2, 6):
            assert cover_violations(g, build_cover(g, h_cov, 2)) == []


def test_cover_violations_detects_bad_cover():
    g = path_graph(4)
    bad = NeighborhoodCover(((frozenset({0, 1}), frozenset({1, 2})),), 1, 1, 10.0)
    assert cover_violations(g, bad)


# ---------------------------------------------------------------- cluster trees and tours


def test_star_cluster_tree_is_the_star():
    g = Graph(4, (Edge(0, 0, 1, 2), Edge(1, 0, 2, 3), Edge(2, 0, 3, 1)))
    tree = build_cluster_tree(g, range(4))
    assert tree.root == 0
    assert {c: p for c, (p, _) in tree.parent.items()} == {1: 0, 2: 0, 3: 0}


def test_triangle_tree_drops_long_edge():
    g = Graph(3, (Edge(0, 0, 1, 1), Edge(1, 1, 2, 1), Edge(2, 0, 2, 3)))
    tree = build_cluster_tree(g, range(3))
    assert {eid for _, eid in tree.parent.values()} == {0, 1}


def test_singleton_cluster_tree():
    tree = build_cluster_tree(Graph(2, (Edge(0, 0, 1, 1),)), [1])
    assert tree.parent == {} and tree.tour.sequence == (1,)


def test_sample_tree_tour_and_laminar_ranges():
    tour = euler_tour(A, SAMPLE_CHILDREN)
    assert tour.sequence == SAMPLE_TOUR
    assert (tour.start[B], tour.end[B]) == (1, 17)
    assert (tour.start[E], tour.end[E]) == (5, 7)
    assert (tour.start[G], tour.end[G]) == (9, 13)


@st.composite
def random_trees(draw, n_max: int = 40):
    n = draw(st.integers(1, n_max))
    parents = [None] + [draw(st.integers(0, v - 1)) for v in range(1, n)]
    children: dict[int, list[int]] = {}
    for v in range(1, n):
        children.setdefault(parents[v], []).append(v)
    return n, parents, children


@given(random_trees())
def test_euler_tour_properties(tree):
    n, parents, children = tree
    tour = euler_tour(0, children)
    assert list(tour.sequence) == euler_tour_reference(0, children)
    assert len(tour) == 2 * n - 1
    # cyclic: any window of length 2n-1 is a tour of the same tree
    for shift in range(len(tour)):
        window = [tour.at(shift + t) for t in range(2 * n - 1)]
        pairs = {frozenset(p) for p in zip(window, window[1:])}
        assert pairs == {frozenset((v, parents[v])) for v in range(1, n)}
    # pos is unique per orientation of each tree edge
    for v in range(1, n):
        p = parents[v]
        assert tour.sequence[tour.pos[(p, v)] - 1] == p and tour.sequence[tour.pos[(p, v)]] == v
        assert tour.sequence[tour.pos[(v, p)] - 1] == v

    # interval containment equals subtree ancestry
    def ancestors(x):
        out = {x}
        while parents[x] is not None:
            x = parents[x]
            out.add(x)
        return out

    for u in range(n):
        for v in range(n):
            nested = tour.start[u] <= tour.start[v] and tour.end[v] <= tour.end[u]
            assert nested == (u in ancestors(v))


def test_maximal_interval_whole_tour_fits():
    tour = euler_tour(A, SAMPLE_CHILDREN)
    assert maximal_interval(tour, 3, SAMPLE_MASS, SAMPLE_MASS.total()) == 3 + 2 * 10


def test_maximal_interval_zero_tau():
    tour = euler_tour(0, {0: [1, 2]})
    assert maximal_interval(tour, 1, NodeWeighting({0: 1, 1: 1, 2: 1}), Fraction(0)) == 1


def test_sample_tree_maximal_intervals():
    tour = euler_tour(A, SAMPLE_CHILDREN)
    red_start = tour.pos[(A, B)]
    red_end = maximal_interval(tour, red_start, SAMPLE_MASS, Fraction(12))
    assert tour.sequence[red_start:red_end] == (B, C, B, D, E, F, E, D, G)
    blue_start = tour.pos[(G, D)]
    blue_end = maximal_interval(tour, blue_start, SAMPLE_MASS, Fraction(12))
    assert tour.sequence[blue_start:blue_end] == (D, B, K, B, A)
    component = {B, C, D, E, F, K}
    assert component <= tour.window(red_start, red_end) | tour.window(blue_start, blue_end)


def test_recover_components_without_failures():
    comps = recover_components(11, (SAMPLE_MASS.total(),), [])
    assert len(comps) == 1
    assert comps[0].intervals == ((0, 20),) and comps[0].mass == (26,)


def test_sample_tree_recover_three_components():
    tour = euler_tour(A, SAMPLE_CHILDREN)
    failed = [
        (record(tour, SAMPLE_MASS, A), record(tour, SAMPLE_MASS, B)),
        (record(tour, SAMPLE_MASS, G), record(tour, SAMPLE_MASS, D)),
    ]
    comps = recover_components(11, (SAMPLE_MASS.total(),), failed)
    got = sorted((c.intervals, c.mass) for c in comps)
    assert got == sorted(
        [
            (((0, 0), (18, 20)), (7,)),
            (((1, 8), (14, 17)), (11,)),
            (((9, 13),), (8,)),
        ]
    )
    assert comps.locate(tour.start[K]).intervals == ((1, 8), (14, 17))
    assert comps.locate(tour.start[H]).intervals == ((9, 13),)


def test_recover_components_rejects_unnested_records():
    with pytest.raises(CorruptLabelError):
        recover_components(3, (Fraction(1),), [(TourRecord(1, 1, (Fraction(0),)), TourRecord(3, 3, (Fraction(0),)))])


@given(random_trees(30), st.integers(0, 2**16))
def test_recover_components_matches_union_find(tree, seed):
    n, parents, children = tree
    rng = random.Random(seed)
    a = NodeWeighting({v: rng.randint(0, 5) for v in range(n)})
    tour = euler_tour(0, children)
    edges = [(v, parents[v]) for v in range(1, n)]
    failed = rng.sample(edges, rng.randint(0, len(edges)))
    kept = [e for e in edges if e not in failed]
    expected = {c: a.mass(c) for c in union_find_components(range(n), kept)}
    recs = [(record(tour, a, p), record(tour, a, c)) for c, p in failed]
    comps = recover_components(n, (a.total(),), recs)
    got = {}
    for comp in comps:
        verts = frozenset(tour.sequence[t] for lo, hi in comp.intervals for t in range(lo, hi + 1))
        got[verts] = comp.mass[0]
    assert got == expected
    for v in range(n):
        comp = comps.locate(tour.start[v])
        assert any(lo <= tour.start[v] <= hi for lo, hi in comp.intervals)
