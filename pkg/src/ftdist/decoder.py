"""Label-only distance queries under edge failures.

A query collects waypoints (the endpoints plus every vertex whose full
label sits inside a failed edge's label) and rebuilds per-scale cluster-tree
components from fingerprints. It then runs a shortest-path search over the
packed discovered graph. Per-scale graphs share only original vertices.

The graph for a waypoint set is the union of one piece contributed by the
failed-edge labels and one piece per waypoint, so a ``Decoder`` bound to a
failure set caches pieces and reuses them across queries.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import CorruptLabelError, UsageError
from .labels import ClusterEntry, EdgeFingerprint, ELabel, LabelHeader, VertexFingerprint, VLabel
from .trees import ComponentIndex, TourRecord, recover_components

UNREACHABLE = math.inf

# edge kinds
ORIGINAL, COMPONENT, PORTAL_WAYPOINT, PORTAL_COMPONENT, HEAVY_PAIR = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class PackedEdge:
    kind: int
    tail: tuple
    head: tuple
    length: int
    directed: bool


@dataclass
class PackedGraph:
    """Typed node keys: ("v", x) original, ("c", i, S, top) component,
    ("out"/"in", i, S, j) portal, ("w", i, x, j) waypoint level."""

    nodes: set[tuple] = field(default_factory=set)
    edge_set: dict[PackedEdge, None] = field(default_factory=dict)

    @property
    def edges(self) -> list[PackedEdge]:
        return list(self.edge_set)

    def add(self, kind: int, a: tuple, b: tuple, length: int, directed: bool = False) -> None:
        if not directed and b < a:
            a, b = b, a
        self.nodes.update((a, b))
        self.edge_set[PackedEdge(kind, a, b, length, directed)] = None

    def merge(self, other: PackedGraph) -> None:
        self.nodes |= other.nodes
        self.edge_set.update(other.edge_set)

    def arcs(self) -> Iterable[tuple[tuple, tuple, int]]:
        for e in self.edge_set:
            yield e.tail, e.head, e.length
            if not e.directed:
                yield e.head, e.tail, e.length

    def distances(self, source: tuple) -> dict[tuple, int]:
        """Plain Dijkstra over the arcs; independent of the sparse-matrix route."""
        adj: dict[tuple, list[tuple[tuple, int]]] = {}
        for a, b, w in self.arcs():
            adj.setdefault(a, []).append((b, w))
        dist = {source: 0}
        heap = [(0, 0, source)]
        tick = 0
        done = set()
        while heap:
            dx, _, x = heapq.heappop(heap)
            if x in done:
                continue
            done.add(x)
            for y, w in adj.get(x, ()):
                nd = dx + w
                if nd < dist.get(y, math.inf):
                    dist[y] = nd
                    tick += 1
                    heapq.heappush(heap, (nd, tick, y))
        return dist


def vertex_node(v: int) -> tuple:
    return ("v", v)


def extract_waypoints(vp: VLabel, vq: VLabel, f_labels: Sequence[ELabel]) -> dict[int, VLabel]:
    """W = {p, q} plus every vertex whose label is stored in a failed edge's label."""
    out: dict[int, VLabel] = {}
    for label in [vp, vq, *(vl for e in f_labels for vl in e.vlabels)]:
        prev = out.get(label.vertex)
        if prev is None:
            out[label.vertex] = label
        elif prev is not label and prev != label:
            raise CorruptLabelError(f"conflicting labels for vertex {label.vertex}")
    return out


class _Scale:
    """Failure-dependent state of one scale: fingerprints seen and components per cluster."""

    def __init__(self, index: int, d: int):
        self.index = index
        self.d = d
        self.failed_records: dict[int, list[tuple[TourRecord, TourRecord]]] = {}
        self.cluster_info: dict[int, tuple[int, tuple[int, ...], tuple[Fraction, ...]]] = {}
        self.components: dict[int, ComponentIndex] = {}
        self.fingerprints: dict[int, VertexFingerprint] = {}
        self.tau_heavy: Fraction | None = None

    def note_fingerprint(self, fp: VertexFingerprint) -> None:
        prev = self.fingerprints.get(fp.vertex)
        if prev is None:
            for entry in fp.clusters:
                self.note_cluster(entry)
            self.fingerprints[fp.vertex] = fp
        elif prev is not fp and prev != fp:
            raise CorruptLabelError(f"conflicting fingerprints for vertex {fp.vertex} at scale {self.index}")

    def note_cluster(self, entry: ClusterEntry) -> None:
        info = (entry.size, entry.levels, entry.cluster_mass)
        if len(entry.cluster_mass) != self.d + 1 or len(entry.subtree_mass) != self.d + 1 or not entry.levels:
            raise CorruptLabelError(f"cluster {entry.cluster} entry has wrong level count")
        prev = self.cluster_info.setdefault(entry.cluster, info)
        if prev != info:
            raise CorruptLabelError(f"inconsistent data for cluster {entry.cluster} at scale {self.index}")

    def note_tau(self, tau: Fraction) -> None:
        if self.tau_heavy is None:
            self.tau_heavy = tau
        elif self.tau_heavy != tau:
            raise CorruptLabelError(f"inconsistent heavy threshold at scale {self.index}")

    def components_of(self, cluster: int) -> ComponentIndex:
        comps = self.components.get(cluster)
        if comps is None:
            size, _, mass = self.cluster_info[cluster]
            comps = recover_components(size, mass, self.failed_records.get(cluster, []))
            self.components[cluster] = comps
        return comps

    def component_node(self, entry: ClusterEntry) -> tuple:
        comp = self.components_of(entry.cluster).locate(entry.start)
        return ("c", self.index, entry.cluster, comp.top)


class Decoder:
    """Answers queries for one fixed failure set, caching per-waypoint pieces."""

    def __init__(self, f_labels: Sequence[ELabel]):
        unique: dict[int, ELabel] = {}
        for e in f_labels:
            unique.setdefault(e.edge, e)
        self.f_labels = tuple(unique[k] for k in sorted(unique))
        self.failed = frozenset(unique)
        self.stored: dict[int, VLabel] = {}
        for e in self.f_labels:
            for vl in e.vlabels:
                prev = self.stored.setdefault(vl.vertex, vl)
                if prev is not vl and prev != vl:
                    raise CorruptLabelError(f"conflicting labels for vertex {vl.vertex}")
        self.header: LabelHeader | None = None
        self._scales: dict[int, _Scale] = {}
        self._pieces: dict[int, PackedGraph] = {}
        self._base: PackedGraph | None = None
        self._index: dict[tuple, int] = {}
        self._arrays: dict[object, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._noted: dict[int, VLabel] = {}
        self._matrices: dict[frozenset[int], csr_matrix] = {}
        self._rows: dict[tuple[frozenset[int], int], np.ndarray] = {}
        for vl in self.stored.values():
            self._note_header(vl)

    # ---------------------------------------------------------------- setup

    def _note_header(self, vl: VLabel) -> None:
        if self._noted.get(vl.vertex) is vl:
            return
        if self.header is None:
            self.header = vl.header
            if len(self.failed) > vl.header.f:
                raise UsageError(f"{len(self.failed)} failures exceed the supported f={vl.header.f}")
            self._prime_failures()
        elif vl.header != self.header:
            raise CorruptLabelError("labels built with different parameters")
        for part in vl.scales:
            sc = self._scale(part.scale)
            sc.note_tau(part.tau_heavy)
            sc.note_fingerprint(part.own)
            for efp in part.edges:
                sc.note_fingerprint(efp.u)
                sc.note_fingerprint(efp.v)
        self._noted[vl.vertex] = vl

    def _scale(self, i: int) -> _Scale:
        sc = self._scales.get(i)
        if sc is None:
            assert self.header is not None
            sc = self._scales[i] = _Scale(i, self.header.d)
        return sc

    def _prime_failures(self) -> None:
        for e in self.f_labels:
            for part in e.scales:
                if part.edge.edge != e.edge:
                    raise CorruptLabelError(f"edge label {e.edge} carries fingerprint of edge {part.edge.edge}")
                sc = self._scale(part.scale)
                for efp in part.edge_fps:
                    sc.note_fingerprint(efp.u)
                    sc.note_fingerprint(efp.v)
                u, v = part.edge.u, part.edge.v
                for cid in part.clusters:
                    eu, ev = u.by_cluster.get(cid), v.by_cluster.get(cid)
                    if eu is None or ev is None:
                        raise CorruptLabelError(f"failed edge {e.edge} endpoints lack cluster {cid}")
                    sc.failed_records.setdefault(cid, []).append((eu.record(), ev.record()))

    # ---------------------------------------------------------------- pieces

    def _add_fingerprinted(self, g: PackedGraph, sc: _Scale, h_diam: int, fp: VertexFingerprint, seen: set) -> None:
        if (sc.index, fp.vertex) in seen:
            return
        seen.add((sc.index, fp.vertex))
        node = vertex_node(fp.vertex)
        g.nodes.add(node)
        for entry in fp.clusters:
            g.add(COMPONENT, node, sc.component_node(entry), h_diam)

    def _add_edge(self, g: PackedGraph, sc: _Scale, h_diam: int, efp: EdgeFingerprint, seen: set) -> None:
        self._add_fingerprinted(g, sc, h_diam, efp.u, seen)
        self._add_fingerprinted(g, sc, h_diam, efp.v, seen)
        if efp.edge not in self.failed:
            g.add(ORIGINAL, vertex_node(efp.u.vertex), vertex_node(efp.v.vertex), efp.length)

    def base_piece(self) -> PackedGraph:
        """Type-1 and type-2 edges discovered from the failed edges' own scale labels."""
        if self._base is None:
            g = PackedGraph()
            seen: set = set()
            if self.header is not None:
                for e in self.f_labels:
                    for part in e.scales:
                        sc = self._scale(part.scale)
                        h_diam = self.header.lengths(part.scale)[2]
                        for efp in part.edge_fps:
                            self._add_edge(g, sc, h_diam, efp, seen)
            self._base = g
        return self._base

    def waypoint_piece(self, vl: VLabel) -> PackedGraph:
        """Everything one waypoint adds: its fingerprinted edges and its portals."""
        g = self._pieces.get(vl.vertex)
        if g is not None:
            return g
        self._note_header(vl)
        assert self.header is not None
        g = PackedGraph()
        seen: set = set()
        d = self.header.d
        for part in vl.scales:
            i = part.scale
            sc = self._scale(i)
            h_diam = self.header.lengths(i)[2]
            quarter = self.header.portal_length(i)
            self._add_fingerprinted(g, sc, h_diam, part.own, seen)
            for efp in part.edges:
                self._add_edge(g, sc, h_diam, efp, seen)
            for entry in part.own.clusters:
                comps = sc.components_of(entry.cluster)
                for j in range(entry.min_level, d + 1):
                    out_node = ("out", i, entry.cluster, j)
                    in_node = ("in", i, entry.cluster, j)
                    mid = ("w", i, vl.vertex, j)
                    g.add(PORTAL_WAYPOINT, out_node, mid, quarter, directed=True)
                    g.add(PORTAL_WAYPOINT, mid, in_node, quarter, directed=True)
                    for comp in comps:
                        if comp.mass[j] > part.tau_heavy:
                            c_node = ("c", i, entry.cluster, comp.top)
                            g.add(PORTAL_COMPONENT, c_node, out_node, quarter, directed=True)
                            g.add(PORTAL_COMPONENT, in_node, c_node, quarter, directed=True)
        self._pieces[vl.vertex] = g
        return g

    def packed_graph(self, waypoints: dict[int, VLabel]) -> PackedGraph:
        """Union over scales of the packed discovered graphs for ``waypoints``."""
        for vl in waypoints.values():
            self._note_header(vl)
        pieces = [self.waypoint_piece(vl) for _, vl in sorted(waypoints.items())]
        g = PackedGraph()
        for piece in [self.base_piece(), *pieces]:
            g.merge(piece)
        return g

    def discovered_graph(self, waypoints: dict[int, VLabel]) -> PackedGraph:
        """Unpacked form: heavy pairs sharing a waypoint get one undirected edge each."""
        packed = self.packed_graph(waypoints)
        g = PackedGraph({x for x in packed.nodes if x[0] in ("v", "c")})
        g.edge_set = {e: None for e in packed.edge_set if e.kind in (ORIGINAL, COMPONENT)}
        assert self.header is not None
        for i, sc in sorted(self._scales.items()):
            tau = sc.tau_heavy
            # clusters holding a waypoint, with that waypoint set
            holders: dict[int, set[int]] = {}
            for w in waypoints:
                fp = sc.fingerprints.get(w)
                if fp is None:
                    continue
                for entry in fp.clusters:
                    holders.setdefault(entry.cluster, set()).add(w)
            clusters = sorted(holders)
            length = 4 * self.header.portal_length(i)
            for x, s1 in enumerate(clusters):
                for s2 in clusters[x:]:
                    if not holders[s1] & holders[s2]:
                        continue
                    j = max(sc.cluster_info[s1][1][0], sc.cluster_info[s2][1][0])
                    heavy1 = [c for c in sc.components_of(s1) if c.mass[j] > tau]
                    heavy2 = [c for c in sc.components_of(s2) if c.mass[j] > tau]
                    for c1 in heavy1:
                        for c2 in heavy2:
                            a, b = ("c", i, s1, c1.top), ("c", i, s2, c2.top)
                            if a != b:
                                g.add(HEAVY_PAIR, a, b, length)
        return g

    # ---------------------------------------------------------------- queries

    def _piece_arrays(self, key: object, piece: PackedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        arrays = self._arrays.get(key)
        if arrays is None:
            index = self._index
            src, dst, w = [], [], []
            for a, b, length in piece.arcs():
                src.append(index.setdefault(a, len(index)))
                dst.append(index.setdefault(b, len(index)))
                w.append(length)
            arrays = (np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(w, dtype=np.float64))
            self._arrays[key] = arrays
        return arrays

    def _matrix(self, waypoints: dict[int, VLabel]) -> csr_matrix:
        key = frozenset(waypoints)
        matrix = self._matrices.get(key)
        if matrix is None:
            parts = [self._piece_arrays("base", self.base_piece())]
            for v in sorted(waypoints):
                parts.append(self._piece_arrays(v, self.waypoint_piece(waypoints[v])))
            n = len(self._index)
            src = np.concatenate([p[0] for p in parts])
            dst = np.concatenate([p[1] for p in parts])
            w = np.concatenate([p[2] for p in parts])
            # keep the shortest of parallel arcs; a sparse matrix would sum them
            flat = src * n + dst
            order = np.lexsort((w, flat))
            flat = flat[order]
            keep = np.ones(len(flat), dtype=bool)
            keep[1:] = flat[1:] != flat[:-1]
            sel = order[keep]
            matrix = csr_matrix((w[sel], (src[sel], dst[sel])), shape=(n, n))
            self._matrices[key] = matrix
        return matrix

    def distance(self, vp: VLabel, vq: VLabel) -> float:
        """Estimate of dist_{G - F}(p, q), or UNREACHABLE."""
        self._note_header(vp)
        self._note_header(vq)
        if vp.vertex == vq.vertex:
            return 0
        waypoints = extract_waypoints(vp, vq, self.f_labels)
        matrix = self._matrix(waypoints)
        key = (frozenset(waypoints), vp.vertex)
        row = self._rows.get(key)
        if row is None:
            source = self._index[vertex_node(vp.vertex)]
            row = self._rows[key] = dijkstra(matrix, directed=True, indices=source)
        dist = row[self._index[vertex_node(vq.vertex)]]
        return UNREACHABLE if math.isinf(dist) else int(dist)


def query(vp: VLabel, vq: VLabel, f_labels: Sequence[ELabel]) -> float:
    """One-shot query; see ``Decoder`` for repeated queries under one failure set."""
    return Decoder(f_labels).distance(vp, vq)


def packed_distance(vp: VLabel, vq: VLabel, f_labels: Sequence[ELabel]) -> float:
    """Same estimate via plain Dijkstra over the explicit packed graph."""
    dec = Decoder(f_labels)
    if vp.vertex == vq.vertex:
        return 0
    g = dec.packed_graph(extract_waypoints(vp, vq, dec.f_labels))
    return g.distances(vertex_node(vp.vertex)).get(vertex_node(vq.vertex), UNREACHABLE)


def discovered_distances(vp: VLabel, vq: VLabel, f_labels: Sequence[ELabel]) -> tuple[dict, dict]:
    """Original-vertex distances from p in the packed and the unpacked discovered graphs."""
    dec = Decoder(f_labels)
    waypoints = extract_waypoints(vp, vq, dec.f_labels)
    packed = dec.packed_graph(waypoints)
    unpacked = dec.discovered_graph(waypoints)
    src = vertex_node(vp.vertex)

    def originals(dist: dict) -> dict:
        return {k[1]: v for k, v in dist.items() if k[0] == "v"}

    return originals(packed.distances(src)), originals(unpacked.distances(src))
