from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cycle_graph, graphs, random_graph, two_triangles
from ftdist.decoder import UNREACHABLE, Decoder
from ftdist.errors import ParseError, UsageError, VersionError
from ftdist.graph import Graph
from ftdist.harness import brute_distance, generate_graph
from ftdist.labels import build_labels
from ftdist.tz import (
    CompiledOracle,
    LaminarIntervals,
    SensitivityOracle,
    bunch_cap,
    compile_failures,
    extended_elabels,
    fast_query,
    tz_build,
    tz_query,
)
from oracles import floyd_warshall


def scan(intervals, x):
    """Shortest and longest containing interval by brute force, lower key on ties."""
    hits = [(b - a, key) for key, (a, b) in intervals.items() if a <= x <= b]
    if not hits:
        return None, None
    shortest = min(hits)[1]
    longest = min(hits, key=lambda t: (-t[0], t[1]))[1]
    return shortest, longest


def laminar_family(rng: random.Random, size: int) -> dict[int, tuple[int, int]]:
    """Euler-tour intervals of a random rooted tree, sampled."""
    n = rng.randint(1, size)
    children: dict[int, list[int]] = {}
    for v in range(1, n):
        children.setdefault(rng.randrange(v), []).append(v)
    seq = []

    def walk(v):
        seq.append(v)
        for c in children.get(v, []):
            walk(c)
            seq.append(v)

    walk(0)
    keys = rng.sample(range(n), rng.randint(1, n))
    return {v: (seq.index(v), len(seq) - 1 - seq[::-1].index(v)) for v in keys}


@pytest.fixture(scope="module")
def oracle():
    g = generate_graph(9)
    labels = build_labels(g)
    tz = tz_build(g, 2)
    return g, labels, tz, SensitivityOracle.store(g, labels, tz)


def test_k_one_is_exact():
    g = random_graph(random.Random(1), 15, 30, connected=True)
    tz = tz_build(g, 1)
    fw = floyd_warshall(g.n, g.edges)
    for u in range(g.n):
        assert tz.bunch(u) == set(range(g.n))
        for v in range(g.n):
            assert tz.estimate(u, v) == fw[u][v]


def test_singleton():
    tz = tz_build(Graph(1, ()), 2)
    assert tz.bunch(0) == {0}
    assert tz.estimate(0, 0) == 0


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        tz_build(cycle_graph(3), 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_stretch_exhaustive_on_fifty_vertices(k):
    rng = random.Random(50 + k)
    for _ in range(3):
        g = random_graph(rng, 50, 100, max_length=8, connected=rng.random() < 0.7)
        tz = tz_build(g, k)
        fw = floyd_warshall(g.n, g.edges)
        for u in range(g.n):
            for v in range(g.n):
                est = tz.estimate(u, v)
                if fw[u][v] == math.inf:
                    assert est == UNREACHABLE
                else:
                    assert fw[u][v] <= est <= (2 * k - 1) * fw[u][v]


@settings(max_examples=30)
@given(graphs(n_max=12, m_max=20), st.integers(1, 3))
def test_bunch_and_cluster_invariants(g, k):
    tz = tz_build(g, k)
    levels, dist = tz.levels, tz.dist
    assert levels[0] == frozenset(range(g.n)) and levels[k] == frozenset()
    assert all(levels[i + 1] <= levels[i] for i in range(k))
    for u in range(g.n):
        for i in range(k):
            limit = min((dist[u][w] for w in levels[i + 1]), default=math.inf)
            expected = {w for w in levels[i] - levels[i + 1] if dist[u][w] < limit}
            assert {w for w, lv in tz.bunches[u].items() if lv == i} == expected
        assert len(tz.bunches[u]) <= bunch_cap(g.n, k)
    for w, parent in tz.tree_parent.items():
        for c, p in parent.items():
            assert p in tz.clusters[w]
            assert dist[w][p] < dist[w][c]


def test_laminar_structure_matches_scan():
    rng = random.Random(1000)
    for _ in range(1000):
        family = laminar_family(rng, 12)
        st_ = LaminarIntervals.build(family)
        hi = max(b for _, b in family.values())
        for x in range(-2, hi + 3):
            assert st_.query(x) == scan(family, x)


def test_empty_failure_set_compiles_empty(oracle):
    g, labels, tz, _ = oracle
    compiled = compile_failures([])
    assert compiled.endpoints == () and compiled.table == {} and compiled.structures == {}
    for p in range(g.n):
        for q in range(g.n):
            assert fast_query(compiled, tz.labels[p], tz.labels[q]) == tz_query(tz.labels[p], tz.labels[q])


def test_single_failure_table_entry_from_decoder(oracle):
    g, labels, tz, _ = oracle
    e = g.edges[0]
    compiled = compile_failures([extended_elabels(g, labels, tz)[e.id]])
    assert set(compiled.endpoints) == {e.u, e.v}
    expected = Decoder([labels.elabel(e.id)]).distance(labels.vlabels[e.u], labels.vlabels[e.v])
    assert compiled.table[(e.u, e.v)] == compiled.table[(e.v, e.u)] == expected


def test_fast_query_sandwich(oracle):
    g, labels, tz, sens = oracle
    rng = random.Random(3)
    bound = 2 * labels.params.stretch * tz.k + 2 * tz.k - 1
    for _ in range(20):
        failures = rng.sample(range(g.m), min(g.m, 2))
        sens.set_failures(failures)
        for p in range(g.n):
            assert sens.distance(p, p) == 0
            for q in range(g.n):
                truth = brute_distance(g, failures, p, q)
                est = sens.distance(p, q, failures)
                if truth == UNREACHABLE:
                    assert est == UNREACHABLE
                else:
                    assert truth <= est <= bound * truth


def test_query_delegates_to_decoder(oracle):
    g, labels, _, sens = oracle
    failures = [0, 3]
    dec = Decoder([labels.elabel(e) for e in failures])
    for p in range(g.n):
        for q in range(g.n):
            assert sens.query(p, q, failures) == dec.distance(labels.vlabels[p], labels.vlabels[q])


def test_set_failures_matches_fresh_compile(oracle):
    g, labels, tz, sens = oracle
    ext = extended_elabels(g, labels, tz)
    failures = [1, 4]
    sens.set_failures(failures)
    for p in range(g.n):
        for q in range(g.n):
            fresh = compile_failures([ext[e] for e in failures])
            assert sens.distance(p, q) == fast_query(fresh, tz.labels[p], tz.labels[q])


def test_stale_failure_set_rejected(oracle):
    _, labels, tz, _ = oracle
    g = generate_graph(9)
    sens = SensitivityOracle.store(g, labels, tz)
    with pytest.raises(UsageError):
        sens.distance(0, 1)
    sens.set_failures([0])
    with pytest.raises(UsageError):
        sens.distance(0, 1, [1])


def test_unknown_edge_id(oracle):
    g, _, _, sens = oracle
    with pytest.raises(KeyError):
        sens.query(0, 1, [g.m])


def test_size_report_skips_trivial_labels(oracle):
    _, labels, _, sens = oracle
    assert sens.size_report()["stored_edge_labels"] == labels.nontrivial_count()
    assert len(sens.elabels) == labels.nontrivial_count()


def test_compiled_bytes_deterministic_and_round_trip(oracle):
    g, labels, tz, sens = oracle
    a = sens.set_failures([2, 0]).to_bytes()
    b = compile_failures([extended_elabels(g, labels, tz)[e] for e in (0, 2)]).to_bytes()
    assert a == b
    back = CompiledOracle.from_bytes(a)
    assert back == sens.compiled
    assert back.to_bytes() == a


def test_container_round_trip(oracle):
    g, _, _, sens = oracle
    data = sens.to_bytes()
    back = SensitivityOracle.from_bytes(data)
    assert back.to_bytes() == data
    sens.set_failures([0])
    back.set_failures([0])
    assert all(back.distance(p, q) == sens.distance(p, q) for p in range(g.n) for q in range(g.n))


def test_container_errors(oracle):
    _, _, _, sens = oracle
    data = sens.to_bytes()
    with pytest.raises(ParseError):
        SensitivityOracle.from_bytes(data[:-1])
    with pytest.raises(VersionError):
        SensitivityOracle.from_bytes(b"FTDL" + data[4:])
    with pytest.raises(VersionError):
        CompiledOracle.from_bytes(data)


def test_store_rejects_mismatched_parts():
    g = two_triangles()
    labels = build_labels(g)
    tz = tz_build(g, 2)
    with pytest.raises(UsageError):
        SensitivityOracle(labels, 2, tz.labels[:-1], [(e.u, e.v) for e in g.edges])
