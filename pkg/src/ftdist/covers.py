"""Deterministic sparse neighborhood covers with strong diameter guarantees."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

from .errors import ConstructionError
from .graph import INF, Graph, sssp

DEFAULT_C_OMEGA = 4


@dataclass(frozen=True)
class NeighborhoodCover:
    """Clusterings of pairwise disjoint clusters.

    Every cluster has strong diameter at most ``h_diam`` and every ball of
    radius ``h_cov`` lies inside at least one cluster.
    """

    clusterings: tuple[tuple[frozenset[int], ...], ...]
    h_cov: int
    h_diam: int
    width_cap: float

    @property
    def width(self) -> int:
        return len(self.clusterings)

    @cached_property
    def clusters(self) -> tuple[frozenset[int], ...]:
        """Distinct clusters in canonical order (sorted vertex tuples)."""
        return tuple(sorted({s for c in self.clusterings for s in c}, key=sorted))


def width_cap(n: int, s_nc: int, c_omega: float = DEFAULT_C_OMEGA) -> float:
    return c_omega * s_nc * n ** (1.0 / s_nc)


def restricted_sssp(g: Graph, source: int, allowed: set[int]) -> dict[int, int]:
    """Dijkstra inside the subgraph induced by ``allowed``."""
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, x = heapq.heappop(heap)
        if d > dist[x]:
            continue
        for y, e in g.adjacency[x]:
            if y not in allowed:
                continue
            nd = d + e.length
            if nd < dist.get(y, INF):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def build_cover(g: Graph, h_cov: int, s_nc: int, c_omega: float = DEFAULT_C_OMEGA) -> NeighborhoodCover:
    """Region-growing cover with ``h_diam = s_nc * h_cov``.

    Each phase carves disjoint clusters. A cluster is a ball of radius
    ``t * h_cov`` around a center inside the not-yet-carved region, where
    ``t <= s_nc // 2`` is the first layer whose growth is at most
    ``n^(1 / (s_nc // 2))``.
    """
    if s_nc < 2:
        raise ValueError("s_nc must be at least 2")
    n = g.n
    layers = s_nc // 2
    balls = []
    for v in range(n):
        dist = sssp(g, v)
        balls.append(frozenset(x for x in range(n) if dist[x] <= h_cov))

    uncovered = set(range(n))
    clusterings: list[tuple[frozenset[int], ...]] = []
    while uncovered:
        region = set(range(n))
        phase: list[frozenset[int]] = []
        for c in sorted(uncovered):
            if c not in uncovered or not balls[c] <= region:
                continue
            dist = restricted_sssp(g, c, region)
            prev = 1
            cluster: frozenset[int] = frozenset((c,))
            for t in range(1, layers + 1):
                ball = frozenset(x for x, d in dist.items() if d <= t * h_cov)
                cluster = ball
                if len(ball) ** layers <= n * prev**layers:
                    break
                prev = len(ball)
            covered = {v for v in uncovered if balls[v] <= cluster}
            if c not in covered:
                raise ConstructionError(f"cover center {c} not covered by its own cluster")
            phase.append(cluster)
            region -= cluster
            uncovered -= covered
        clusterings.append(tuple(sorted(phase, key=sorted)))

    cap = width_cap(n, s_nc, c_omega)
    if len(clusterings) > cap:
        raise ConstructionError(f"cover width {len(clusterings)} exceeds cap {cap:.2f}")
    return NeighborhoodCover(tuple(clusterings), h_cov, s_nc * h_cov, cap)


def strong_diameter(g: Graph, cluster: frozenset[int]) -> float:
    allowed = set(cluster)
    worst = 0
    for v in cluster:
        dist = restricted_sssp(g, v, allowed)
        if len(dist) < len(cluster):
            return INF
        worst = max(worst, max(dist.values()))
    return worst


def cover_violations(g: Graph, cover: NeighborhoodCover) -> list[str]:
    """Exhaustive check of disjointness, diameter, covering radius and width."""
    problems = []
    for i, clustering in enumerate(cover.clusterings):
        seen: set[int] = set()
        for s in clustering:
            if seen & s:
                problems.append(f"clustering {i} has overlapping clusters")
            seen |= s
            if strong_diameter(g, s) > cover.h_diam:
                problems.append(f"cluster {sorted(s)} exceeds diameter {cover.h_diam}")
    for v in range(g.n):
        dist = sssp(g, v)
        ball = {x for x in range(g.n) if dist[x] <= cover.h_cov}
        if not any(ball <= s for s in cover.clusters):
            problems.append(f"ball around {v} not contained in any cluster")
    if cover.width > cover.width_cap:
        problems.append(f"width {cover.width} exceeds cap {cover.width_cap}")
    return problems
