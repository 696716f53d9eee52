"""Exact-arithmetic multigraph, node weightings, moving cuts and demands.

Every quantity that participates in a ``⪯`` comparison is a
:class:`fractions.Fraction`; distances are integers because lengths are
integers and cut inflations land on the integer grid.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import GraphError

Number = int | Fraction
INF = math.inf

DEFAULT_EDGE_CAP_FACTOR = 10


def as_fraction(x: Number | str) -> Fraction:
    """Convert ints, Fractions and decimal strings; floats are rejected."""
    if isinstance(x, float):
        raise GraphError(f"floating point value {x!r} not allowed; use Fraction")
    return Fraction(x)


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    length: int
    capacity: Fraction = Fraction(1)

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u

    @property
    def pair(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u <= self.v else (self.v, self.u)


@dataclass(frozen=True)
class Graph:
    """Undirected multigraph on vertices ``0..n-1``; edges sorted by id."""

    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        edges = tuple(sorted(self.edges, key=lambda e: e.id))
        object.__setattr__(self, "edges", edges)
        seen: set[int] = set()
        for e in edges:
            if e.id in seen:
                raise GraphError(f"duplicate edge id {e.id}")
            seen.add(e.id)
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise GraphError(f"edge {e.id} has endpoint outside 0..{self.n - 1}")
            if e.u == e.v:
                raise GraphError(f"edge {e.id} is a self-loop")
            if not isinstance(e.length, int) or isinstance(e.length, bool) or e.length < 1:
                raise GraphError(f"edge {e.id} length must be an integer >= 1")
            if not isinstance(e.capacity, Fraction) or e.capacity < 1:
                raise GraphError(f"edge {e.id} capacity must be a Fraction >= 1")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_length(self) -> int:
        return max((e.length for e in self.edges), default=1)

    @cached_property
    def edge_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, Edge], ...], ...]:
        adj: list[list[tuple[int, Edge]]] = [[] for _ in range(self.n)]
        for e in self.edges:
            adj[e.u].append((e.v, e))
            adj[e.v].append((e.u, e))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def edge_rank(self) -> dict[int, int]:
        """Position of each edge in the global order (ascending edge id)."""
        return {e.id: i for i, e in enumerate(self.edges)}

    def degree(self) -> NodeWeighting:
        """deg_G(v) = sum of capacities of incident edges."""
        acc: dict[int, Fraction] = {}
        for e in self.edges:
            acc[e.u] = acc.get(e.u, Fraction(0)) + e.capacity
            acc[e.v] = acc.get(e.v, Fraction(0)) + e.capacity
        return NodeWeighting(acc)

    def without_edges(self, ids: Iterable[int]) -> Graph:
        drop = set(ids)
        unknown = drop - self.edge_by_id.keys()
        if unknown:
            raise GraphError(f"unknown edge ids {sorted(unknown)}")
        return Graph(self.n, tuple(e for e in self.edges if e.id not in drop))

    def with_lengths(self, lengths: Mapping[int, int]) -> Graph:
        return Graph(
            self.n,
            tuple(Edge(e.id, e.u, e.v, lengths.get(e.id, e.length), e.capacity) for e in self.edges),
        )

    def with_unit_capacities(self) -> Graph:
        if all(e.capacity == 1 for e in self.edges):
            return self
        return Graph(self.n, tuple(Edge(e.id, e.u, e.v, e.length) for e in self.edges))

    def induced(self, vertices: Iterable[int]) -> list[Edge]:
        keep = set(vertices)
        return [e for e in self.edges if e.u in keep and e.v in keep]


class NodeWeighting(Mapping[int, Fraction]):
    """Sparse nonnegative vertex weights; missing vertices weigh zero."""

    __slots__ = ("_w", "_hash")

    def __init__(self, weights: Mapping[int, Number] | Iterable[tuple[int, Number]] | None = None):
        items = weights.items() if isinstance(weights, Mapping) else (weights or ())
        w: dict[int, Fraction] = {}
        for v, x in items:
            x = as_fraction(x)
            if x < 0:
                raise GraphError(f"negative weight {x} at vertex {v}")
            if x:
                w[v] = w.get(v, Fraction(0)) + x
        self._w = dict(sorted(w.items()))
        self._hash: int | None = None

    def __getitem__(self, v: int) -> Fraction:
        return self._w[v]

    def __iter__(self) -> Iterator[int]:
        return iter(self._w)

    def __len__(self) -> int:
        return len(self._w)

    def __call__(self, v: int) -> Fraction:
        return self._w.get(v, Fraction(0))

    def __repr__(self) -> str:
        return f"NodeWeighting({self._w!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, NodeWeighting):
            return self._w == other._w
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._w.items()))
        return self._hash

    def total(self) -> Fraction:
        return sum(self._w.values(), Fraction(0))

    def mass(self, vertices: Iterable[int]) -> Fraction:
        return sum((self(v) for v in set(vertices)), Fraction(0))

    def __add__(self, other: NodeWeighting) -> NodeWeighting:
        acc = dict(self._w)
        for v, x in other._w.items():
            acc[v] = acc.get(v, Fraction(0)) + x
        return NodeWeighting(acc)

    def __sub__(self, other: NodeWeighting) -> NodeWeighting:
        acc = dict(self._w)
        for v, x in other._w.items():
            acc[v] = acc.get(v, Fraction(0)) - x
        return NodeWeighting(acc)

    def __le__(self, other: NodeWeighting) -> bool:
        """Pointwise comparison A ⪯ A'."""
        return all(x <= other(v) for v, x in self._w.items())

    def __ge__(self, other: NodeWeighting) -> bool:
        return other <= self

    def is_zero(self) -> bool:
        return not self._w


class MovingCut(Mapping[int, Fraction]):
    """Edge values that are multiples of ``1/h`` in ``[0, 1]``."""

    __slots__ = ("h", "_c")

    def __init__(self, h: int, values: Mapping[int, Number] | None = None):
        if not isinstance(h, int) or h < 1:
            raise GraphError("cut length bound h must be a positive integer")
        self.h = h
        c: dict[int, Fraction] = {}
        for eid, x in (values or {}).items():
            x = as_fraction(x)
            if x < 0 or x > 1:
                raise GraphError(f"cut value {x} on edge {eid} outside [0, 1]")
            if (x * h).denominator != 1:
                raise GraphError(f"cut value {x} on edge {eid} is not a multiple of 1/{h}")
            if x:
                c[eid] = x
        self._c = dict(sorted(c.items()))

    def __getitem__(self, eid: int) -> Fraction:
        return self._c[eid]

    def __iter__(self) -> Iterator[int]:
        return iter(self._c)

    def __len__(self) -> int:
        return len(self._c)

    def __call__(self, eid: int) -> Fraction:
        return self._c.get(eid, Fraction(0))

    def __repr__(self) -> str:
        return f"MovingCut(h={self.h}, {self._c!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MovingCut):
            return self.h == other.h and self._c == other._c
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.h, tuple(self._c.items())))

    def is_zero(self) -> bool:
        return not self._c

    def __add__(self, other: MovingCut) -> MovingCut:
        if other.h != self.h:
            raise GraphError("cannot add cuts with different length bounds")
        acc = dict(self._c)
        for eid, x in other._c.items():
            acc[eid] = acc.get(eid, Fraction(0)) + x
        return MovingCut(self.h, acc)

    def size(self, g: Graph) -> Fraction:
        """|C| = sum of C(e) * u(e)."""
        self.check(g)
        return sum((x * g.edge_by_id[eid].capacity for eid, x in self._c.items()), Fraction(0))

    def degree(self, g: Graph) -> NodeWeighting:
        """deg_C(v) = sum over incident edges of u(e) * C(e)."""
        self.check(g)
        acc: dict[int, Fraction] = {}
        for eid, x in self._c.items():
            e = g.edge_by_id[eid]
            y = x * e.capacity
            acc[e.u] = acc.get(e.u, Fraction(0)) + y
            acc[e.v] = acc.get(e.v, Fraction(0)) + y
        return NodeWeighting(acc)

    def check(self, g: Graph) -> None:
        unknown = [eid for eid in self._c if eid not in g.edge_by_id]
        if unknown:
            raise GraphError(f"cut references unknown edge ids {unknown}")


class Demand(Mapping[tuple[int, int], Fraction]):
    """Sparse nonnegative demand between ordered vertex pairs."""

    __slots__ = ("h", "_d")

    def __init__(self, values: Mapping[tuple[int, int], Number] | None = None, h: Number | None = None):
        d: dict[tuple[int, int], Fraction] = {}
        for pair, x in (values or {}).items():
            x = as_fraction(x)
            if x < 0:
                raise GraphError(f"negative demand {x} on {pair}")
            if x:
                d[pair] = d.get(pair, Fraction(0)) + x
        self._d = dict(sorted(d.items()))
        self.h = h

    def __getitem__(self, pair: tuple[int, int]) -> Fraction:
        return self._d[pair]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __repr__(self) -> str:
        return f"Demand({self._d!r}, h={self.h})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Demand):
            return self._d == other._d
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self._d.items()))

    def total(self) -> Fraction:
        return sum(self._d.values(), Fraction(0))

    def load(self) -> NodeWeighting:
        acc: dict[int, Fraction] = {}
        for (u, v), x in self._d.items():
            acc[u] = acc.get(u, Fraction(0)) + x
            acc[v] = acc.get(v, Fraction(0)) + x
        return NodeWeighting(acc)

    def respects(self, a: NodeWeighting) -> bool:
        return self.load() <= a

    def is_h_length(self, g: Graph, h: Number) -> bool:
        dist = all_pairs(g, {u for u, _ in self._d})
        return all(dist[u][v] <= h for u, v in self._d)

    def off_diagonal(self) -> dict[tuple[int, int], Fraction]:
        return {p: x for p, x in self._d.items() if p[0] != p[1]}

    def restrict(self, pairs: Iterable[tuple[int, int]]) -> Demand:
        keep = set(pairs)
        return Demand({p: x for p, x in self._d.items() if p in keep}, h=self.h)


def sssp(g: Graph, source: int) -> list[Number | float]:
    """Dijkstra from ``source``; unreachable vertices get ``INF``."""
    dist: list[Number | float] = [INF] * g.n
    dist[source] = 0
    heap: list[tuple[Number, int]] = [(0, source)]
    adj = g.adjacency
    while heap:
        d, x = heapq.heappop(heap)
        if d > dist[x]:
            continue
        for y, e in adj[x]:
            nd = d + e.length
            if nd < dist[y]:
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def all_pairs(g: Graph, sources: Iterable[int] | None = None) -> dict[int, list[Number | float]]:
    srcs = range(g.n) if sources is None else sorted(set(sources))
    return {s: sssp(g, s) for s in srcs}


def apply_cut(g: Graph, c: MovingCut, scale_h: int) -> Graph:
    """G − C: lengths l(e) + scale_h * C(e); capacities unchanged."""
    c.check(g)
    if c.is_zero():
        return g
    lengths: dict[int, int] = {}
    for eid, x in c.items():
        inc = scale_h * x
        if inc.denominator != 1:
            raise GraphError(f"inflation {inc} on edge {eid} is not integral")
        lengths[eid] = g.edge_by_id[eid].length + int(inc)
    return g.with_lengths(lengths)


def lexmax_tree(g: Graph, source: int) -> tuple[list[Number | float], list[Edge | None]]:
    """Distances and the predecessor edge of the lex-max shortest path to each vertex.

    A path's key is an integer whose bits mark its edges, with the lowest
    edge id in the most significant position; larger keys win ties.
    """
    dist = sssp(g, source)
    m = g.m
    rank = g.edge_rank
    key: list[int] = [0] * g.n
    pred: list[Edge | None] = [None] * g.n
    order = sorted((d, x) for x, d in enumerate(dist) if d != INF)
    for d, x in order:
        if x == source:
            continue
        best = -1
        for y, e in g.adjacency[x]:
            if dist[y] + e.length == d:
                k = key[y] | (1 << (m - 1 - rank[e.id]))
                if k > best:
                    best, pred[x] = k, e
        key[x] = best
    return dist, pred


def lexmax_shortest_path(g: Graph, u: int, v: int) -> tuple[int, ...] | None:
    """Edge ids of the lex-max shortest (u, v)-path, ordered from u; None if unreachable."""
    dist, pred = lexmax_tree(g, u)
    if dist[v] == INF:
        return None
    path: list[int] = []
    x = v
    while x != u:
        e = pred[x]
        assert e is not None
        path.append(e.id)
        x = e.other(x)
    path.reverse()
    return tuple(path)


def demand_stats(c: MovingCut, d: Demand, g: Graph, h: Number) -> tuple[Fraction, Fraction | float]:
    """(sep_h(C, D), spars_h(C, D)) with sparsity INF when nothing is separated."""
    cut_graph = apply_cut(g, c, c.h)
    dist = all_pairs(cut_graph, {u for u, _ in d})
    sep = sum((x for (u, v), x in d.items() if dist[u][v] > h), Fraction(0))
    if sep == 0:
        return sep, INF
    return sep, c.size(g) / sep


def parse_graph(text: str, max_edge_factor: int = DEFAULT_EDGE_CAP_FACTOR) -> Graph:
    """Parse ``n m L`` followed by ``edge_id u v length cap_num cap_den`` lines."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 3:
        raise GraphError("header must be 'n m L'")
    try:
        n, m, max_len = (int(x) for x in lines[0])
        rows = [tuple(int(x) for x in row) for row in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"non-integer field: {exc}") from None
    if len(rows) != m:
        raise GraphError(f"header declares {m} edges, found {len(rows)}")
    edges = []
    for row in rows:
        if len(row) != 6:
            raise GraphError(f"edge line needs 6 fields, got {len(row)}")
        eid, u, v, length, num, den = row
        if den <= 0:
            raise GraphError(f"edge {eid} capacity denominator must be positive")
        if length > max_len:
            raise GraphError(f"edge {eid} length {length} exceeds declared L={max_len}")
        edges.append(Edge(eid, u, v, length, Fraction(num, den)))
    g = Graph(n, tuple(edges))
    check_edge_cap(g, max_edge_factor)
    return g


def check_edge_cap(g: Graph, factor: int = DEFAULT_EDGE_CAP_FACTOR) -> None:
    if g.m > factor * g.n * g.n:
        raise GraphError(f"m={g.m} exceeds cap {factor}*n^2")


def format_graph(g: Graph) -> str:
    out = [f"{g.n} {g.m} {g.max_length}"]
    for e in g.edges:
        out.append(f"{e.id} {e.u} {e.v} {e.length} {e.capacity.numerator} {e.capacity.denominator}")
    return "\n".join(out) + "\n"
