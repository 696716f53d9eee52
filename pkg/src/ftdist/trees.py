"""Cluster shortest-path trees, Euler tours and tour-interval component recovery."""

from __future__ import annotations

import bisect
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .covers import restricted_sssp
from .errors import ConstructionError, CorruptLabelError
from .graph import Graph, NodeWeighting


@dataclass(frozen=True)
class EulerTour:
    """Tour ``r, tour(c1), r, tour(c2), ..., r`` with children in ascending id order."""

    sequence: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.sequence)

    @property
    def size(self) -> int:
        """Number of tree vertices."""
        return (len(self.sequence) + 1) // 2

    @cached_property
    def start(self) -> dict[int, int]:
        first: dict[int, int] = {}
        for t, v in enumerate(self.sequence):
            first.setdefault(v, t)
        return first

    @cached_property
    def end(self) -> dict[int, int]:
        return {v: t for t, v in enumerate(self.sequence)}

    @cached_property
    def pos(self) -> dict[tuple[int, int], int]:
        """pos(u, v) = the unique t with T[t-1] = u and T[t] = v."""
        return {(self.sequence[t - 1], self.sequence[t]): t for t in range(1, len(self.sequence))}

    def at(self, t: int) -> int:
        """Vertex at cyclic position ``t`` (the tour's first and last entries coincide)."""
        period = len(self.sequence) - 1
        return self.sequence[t % period] if period else self.sequence[0]

    def window(self, t: int, t_end: int) -> set[int]:
        """Vertex set T[t, t_end)."""
        return {self.at(x) for x in range(t, t_end)}


@dataclass(frozen=True)
class ClusterTree:
    cluster: frozenset[int]
    root: int
    parent: dict[int, tuple[int, int]]  # child -> (parent, edge id)
    depth: dict[int, int]
    tour: EulerTour

    @cached_property
    def children(self) -> dict[int, list[int]]:
        kids: dict[int, list[int]] = {v: [] for v in self.cluster}
        for c, (p, _) in self.parent.items():
            kids[p].append(c)
        for v in kids:
            kids[v].sort()
        return kids

    @cached_property
    def edge_pairs(self) -> frozenset[frozenset[int]]:
        """Tree edges as unordered vertex pairs."""
        return frozenset(frozenset((c, p)) for c, (p, _) in self.parent.items())

    @property
    def radius(self) -> int:
        return max(self.depth.values())

    def subtree_mass(self, a: NodeWeighting) -> dict[int, Fraction]:
        """A(subtree of v) for every tree vertex."""
        tour = self.tour
        return {v: a.mass(tour.sequence[tour.start[v] : tour.end[v] + 1]) for v in self.cluster}


def euler_tour(root: int, children: dict[int, list[int]]) -> EulerTour:
    seq: list[int] = [root]
    stack: list[tuple[int, int]] = [(root, 0)]
    while stack:
        v, i = stack.pop()
        kids = children.get(v, [])
        if i < len(kids):
            stack.append((v, i + 1))
            c = kids[i]
            seq.append(c)
            stack.append((c, 0))
        elif stack:
            seq.append(stack[-1][0])
    return EulerTour(tuple(seq))


def build_cluster_tree(g: Graph, cluster: Iterable[int]) -> ClusterTree:
    """Shortest-path tree of the induced subgraph, rooted at the lowest id.

    Each vertex hangs off the tight incoming edge with the lowest edge id.
    """
    members = frozenset(cluster)
    if not members:
        raise ConstructionError("empty cluster")
    root = min(members)
    dist = restricted_sssp(g, root, set(members))
    if len(dist) != len(members):
        raise ConstructionError(f"cluster {sorted(members)} is disconnected in its induced subgraph")
    parent: dict[int, tuple[int, int]] = {}
    for v in members:
        if v == root:
            continue
        tight = [(e.id, y) for y, e in g.adjacency[v] if y in members and dist[y] + e.length == dist[v]]
        eid, y = min(tight)
        parent[v] = (y, eid)
    children: dict[int, list[int]] = {}
    for c, (p, _) in parent.items():
        children.setdefault(p, []).append(c)
    for kids in children.values():
        kids.sort()
    return ClusterTree(members, root, parent, dict(dist), euler_tour(root, children))


def maximal_interval(tour: EulerTour, t: int, a: NodeWeighting, tau: Fraction) -> int:
    """Largest t' in [t, t + 2(|S|-1)] whose window T[t, t') has mass at most tau.

    Vertices repeated inside the window count once.
    """
    limit = t + 2 * (tour.size - 1)
    seen: set[int] = set()
    mass = Fraction(0)
    t_end = t
    while t_end < limit:
        w = tour.at(t_end)
        if w not in seen:
            if mass + a(w) > tau:
                break
            seen.add(w)
            mass += a(w)
        t_end += 1
    return t_end


@dataclass(frozen=True)
class TourRecord:
    """What a fingerprint knows about a vertex inside one cluster tree."""

    start: int
    end: int
    mass: tuple[Fraction, ...]  # A_j(subtree) for each level j

    def contains(self, other: TourRecord) -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class Component:
    top: int  # tour start index of the component's highest vertex
    intervals: tuple[tuple[int, int], ...]  # closed tour intervals
    mass: tuple[Fraction, ...]


class ComponentIndex(Sequence[Component]):
    """Components of T_S minus failed tree edges, searchable by tour index."""

    def __init__(self, components: list[Component], records: list[TourRecord], parents: list[int]):
        self._components = components
        self._records = records
        self._parents = parents
        self._starts = [r.start for r in records]

    def __getitem__(self, i):  # type: ignore[override]
        return self._components[i]

    def __len__(self) -> int:
        return len(self._components)

    def locate(self, t: int) -> Component:
        """Component holding the vertex whose tour start index is ``t``."""
        i = bisect.bisect_right(self._starts, t) - 1
        while i >= 0 and not (self._records[i].start <= t <= self._records[i].end):
            i = self._parents[i]
        return self._components[i + 1]


def recover_components(
    size: int,
    root_mass: Sequence[Fraction],
    failed: Iterable[tuple[TourRecord, TourRecord]],
) -> ComponentIndex:
    """Split a cluster tree into components from failed tree-edge endpoint records.

    For each failed edge the endpoint whose interval lies inside the other's
    is the child; each component is a child interval minus its directly
    nested child intervals.
    """
    last = 2 * size - 2
    children: dict[int, TourRecord] = {}
    for r1, r2 in failed:
        for r in (r1, r2):
            if not (0 <= r.start <= r.end <= last) or len(r.mass) != len(root_mass):
                raise CorruptLabelError(f"tour record {r} outside tree of size {size}")
        if r1 != r2 and r2.contains(r1):
            child = r1
        elif r1 != r2 and r1.contains(r2):
            child = r2
        else:
            raise CorruptLabelError("failed tree edge endpoints are not nested")
        if child.start == 0:
            raise CorruptLabelError("root cannot be a child endpoint")
        prior = children.get(child.start)
        if prior is not None and prior != child:
            raise CorruptLabelError("conflicting records for one tree vertex")
        children[child.start] = child

    records = sorted(children.values(), key=lambda r: (r.start, -r.end))
    parents: list[int] = []
    stack: list[int] = []
    for i, r in enumerate(records):
        while stack and records[stack[-1]].end < r.start:
            stack.pop()
        if stack and not records[stack[-1]].contains(r):
            raise CorruptLabelError("failed subtree intervals are not laminar")
        parents.append(stack[-1] if stack else -1)
        stack.append(i)

    nested: list[list[int]] = [[] for _ in range(len(records) + 1)]
    for i, p in enumerate(parents):
        nested[p + 1].append(i)

    outer = [TourRecord(0, last, tuple(root_mass))] + records
    components = []
    for k, rec in enumerate(outer):
        inner = [records[i] for i in nested[k]]
        mass = list(rec.mass)
        pieces = []
        cursor = rec.start
        for child in inner:
            if child.start > cursor:
                pieces.append((cursor, child.start - 1))
            cursor = child.end + 1
            mass = [x - y for x, y in zip(mass, child.mass)]
        if cursor <= rec.end:
            pieces.append((cursor, rec.end))
        if any(x < 0 for x in mass):
            raise CorruptLabelError("component mass is negative")
        components.append(Component(rec.start, tuple(pieces), tuple(mass)))
    return ComponentIndex(components, records, parents)
