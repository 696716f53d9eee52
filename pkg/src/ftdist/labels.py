"""Per-scale structures and the fault-tolerant distance labels built from them.

For each scale ``h = 2^i`` the builder computes an expander hierarchy on
the unit-capacity graph, derived graphs ``G_j``, neighborhood covers
``N_j``, cluster trees and sampled edge sets ``L_j``. Vertex labels carry
fingerprints of edges around light clusters; edge labels carry, for every
cluster tree containing the edge, the maximal light tour windows next to it
together with full vertex labels of the stored edges' endpoints.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .covers import NeighborhoodCover, build_cover
from .errors import GraphError
from .graph import Graph, apply_cut, lexmax_tree
from .hierarchy import Hierarchy, build_hierarchy
from .hitting import ConstraintSystem, Selection, build_constraints, derandomized_select, incident_edges
from .trees import ClusterTree, TourRecord, build_cluster_tree, maximal_interval

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelHeader:
    """Parameters a decoder needs from any label."""

    f: int
    s_nc: int
    s_ed: int
    d: int

    @property
    def stretch(self) -> int:
        return 50 * self.s_nc * self.s_ed * self.d

    def lengths(self, scale: int) -> tuple[int, int, int, int]:
        """(h, h_cov, h_diam, h_ed) for scale index ``scale``."""
        h = 1 << scale
        h_cov = 2 * h
        h_diam = h_cov * self.s_nc
        return h, h_cov, h_diam, 2 * h_diam

    def portal_length(self, scale: int) -> int:
        """Length of each of the four directed hops replacing one heavy-pair edge."""
        _, _, h_diam, h_ed = self.lengths(scale)
        total = h_ed * self.s_ed + 2 * h_diam
        assert total % 4 == 0
        return total // 4


@dataclass(frozen=True)
class LabelParams:
    f: int = 2
    s_nc: int = 2
    s_ed: int = 100
    d: int = 2
    c_tau: int = 4
    c_omega: int = 4
    phi: Fraction | None = None
    mode: str = "poly"

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("hierarchy depth d must be at least 1")
        if self.f < 0:
            raise ValueError("f must be nonnegative")
        if self.s_nc < 2:
            raise ValueError("s_nc must be at least 2")
        if self.s_ed < 100:
            raise ValueError("s_ed must be at least 100")

    @property
    def header(self) -> LabelHeader:
        return LabelHeader(self.f, self.s_nc, self.s_ed, self.d)

    @property
    def stretch(self) -> int:
        return self.header.stretch

    def tau_hit(self) -> Fraction:
        """Cut-mass threshold for paths that must be hit, in cut units."""
        return Fraction(1, (2 * self.f + 1) * 4 * self.s_nc * self.s_ed * self.d)

    def tau_heavy(self, n: int, phi: Fraction) -> Fraction:
        """f * ceil(c_tau ln(n) / phi), floored at the certified bound f * ceil(1/(2 phi))."""
        scaled = math.ceil(self.c_tau * math.log(n) / float(phi)) if n > 1 else 0
        certified = math.ceil(1 / (2 * phi))
        return Fraction(self.f * max(scaled, certified))


# ---------------------------------------------------------------- fingerprints


@dataclass(frozen=True)
class ClusterEntry:
    """A vertex's view of one cluster tree containing it."""

    cluster: int
    size: int
    levels: tuple[int, ...]
    start: int
    end: int
    cluster_mass: tuple[Fraction, ...]
    subtree_mass: tuple[Fraction, ...]

    @property
    def min_level(self) -> int:
        return self.levels[0]

    def record(self) -> TourRecord:
        return TourRecord(self.start, self.end, self.subtree_mass)


@dataclass(frozen=True)
class VertexFingerprint:
    vertex: int
    clusters: tuple[ClusterEntry, ...]

    @cached_property
    def by_cluster(self) -> dict[int, ClusterEntry]:
        return {c.cluster: c for c in self.clusters}


@dataclass(frozen=True)
class EdgeFingerprint:
    edge: int
    length: int
    u: VertexFingerprint
    v: VertexFingerprint


@dataclass(frozen=True)
class VLabelScale:
    scale: int
    tau_heavy: Fraction
    own: VertexFingerprint
    edges: tuple[EdgeFingerprint, ...]


@dataclass(frozen=True)
class VLabel:
    vertex: int
    header: LabelHeader
    scales: tuple[VLabelScale, ...]


@dataclass(frozen=True)
class IntervalEntry:
    """Maximal light window T_S[start, stop) following orientation tail -> head."""

    cluster: int
    tail: int
    head: int
    level: int
    start: int
    stop: int
    edges: tuple[int, ...]


@dataclass(frozen=True)
class ELabelScale:
    scale: int
    edge: EdgeFingerprint
    clusters: tuple[int, ...]
    intervals: tuple[IntervalEntry, ...]
    edge_fps: tuple[EdgeFingerprint, ...]


@dataclass(frozen=True)
class ELabel:
    edge: int
    scales: tuple[ELabelScale, ...]
    vlabels: tuple[VLabel, ...]

    @property
    def trivial(self) -> bool:
        return not self.scales

    @cached_property
    def by_scale(self) -> dict[int, ELabelScale]:
        return {s.scale: s for s in self.scales}


# ---------------------------------------------------------------- per-scale build


@dataclass
class ScaleStructures:
    index: int
    h: int
    h_cov: int
    h_diam: int
    h_ed: int
    hierarchy: Hierarchy
    graphs: list[Graph]  # G_0 .. G_d
    covers: list[NeighborhoodCover]  # N_0 .. N_d
    clusters: list[frozenset[int]]  # canonical order; index = cluster id
    levels: list[tuple[int, ...]]
    trees: list[ClusterTree]
    tau_heavy: Fraction
    tau_hit: Fraction
    sampled: list[frozenset[int]]  # L_0 .. L_d
    constraints: list[ConstraintSystem | None] = field(default_factory=list)
    selections: list[Selection | None] = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.graphs) - 1

    @cached_property
    def cluster_mass(self) -> list[tuple[Fraction, ...]]:
        return [tuple(a.mass(s) for a in self.hierarchy.levels) for s in self.clusters]

    @cached_property
    def subtree_mass(self) -> list[dict[int, tuple[Fraction, ...]]]:
        out = []
        for tree in self.trees:
            per_level = [tree.subtree_mass(a) for a in self.hierarchy.levels]
            out.append({v: tuple(m[v] for m in per_level) for v in tree.cluster})
        return out

    @cached_property
    def clusters_of(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for cid, s in enumerate(self.clusters):
            for v in s:
                out.setdefault(v, []).append(cid)
        return out

    def cover_mass(self) -> int:
        """Sum over levels j and clusters S in N_j of |S|."""
        return sum(len(s) for cover in self.covers for s in cover.clusters)


def lexmax_paths(g: Graph) -> list[tuple[int, ...]]:
    """Edge sets of the lex-max shortest path for every connected pair u < v."""
    out = []
    for u in range(g.n):
        dist, pred = lexmax_tree(g, u)
        for v in range(u + 1, g.n):
            if dist[v] == math.inf:
                continue
            path = []
            x = v
            while x != u:
                e = pred[x]
                path.append(e.id)
                x = e.other(x)
            out.append(tuple(sorted(path)))
    return out


def build_scale_structures(
    g: Graph,
    i: int,
    params: LabelParams,
    paths: Sequence[tuple[int, ...]] | None = None,
) -> ScaleStructures:
    g = g.with_unit_capacities()
    header = params.header
    h, h_cov, h_diam, h_ed = header.lengths(i)
    d = params.d
    hier = build_hierarchy(g, g.degree(), h_ed, params.s_ed, d, params.phi, params.mode, params.c_omega)
    grid = h_ed * params.s_ed
    graphs = [g] * (d + 1)
    for j in range(d - 1, -1, -1):
        graphs[j] = apply_cut(graphs[j + 1], hier.cut(j + 1), grid)
    covers = [build_cover(gj, h_cov, params.s_nc, params.c_omega) for gj in graphs]

    levels_of: dict[frozenset[int], list[int]] = {}
    for j, cover in enumerate(covers):
        for s in cover.clusters:
            levels_of.setdefault(s, []).append(j)
    clusters = sorted(levels_of, key=sorted)
    levels = [tuple(levels_of[s]) for s in clusters]
    trees = [build_cluster_tree(graphs[lv[0]], s) for s, lv in zip(clusters, levels)]

    tau_heavy = params.tau_heavy(g.n, hier.phi)
    tau_hit = params.tau_hit()
    paths = lexmax_paths(g) if paths is None else paths
    sampled = [frozenset(e.id for e in g.edges)]
    constraints: list[ConstraintSystem | None] = [None]
    selections: list[Selection | None] = [None]
    for j in range(1, d + 1):
        cs = build_constraints(g, hier.cut(j), hier.levels[j], trees, paths, tau_hit, tau_heavy)
        sel = derandomized_select(cs)
        constraints.append(cs)
        selections.append(sel)
        sampled.append(sel.selected)
    return ScaleStructures(
        i,
        h,
        h_cov,
        h_diam,
        h_ed,
        hier,
        graphs,
        covers,
        clusters,
        levels,
        trees,
        tau_heavy,
        tau_hit,
        sampled,
        constraints,
        selections,
    )


# ---------------------------------------------------------------- assembly


@dataclass
class LabelSet:
    n: int
    m: int
    params: LabelParams
    i_max: int
    vlabels: tuple[VLabel, ...]
    elabels: dict[int, ELabel]
    scales: list[ScaleStructures] | None = field(default=None, repr=False, compare=False)

    def elabel(self, eid: int) -> ELabel:
        return self.elabels[eid]

    def nontrivial_count(self) -> int:
        return sum(1 for e in self.elabels.values() if not e.trivial)


def scale_count(g: Graph) -> int:
    """i_max = ceil(log2(n L))."""
    return (g.n * g.max_length - 1).bit_length()


class _ScaleAssembler:
    def __init__(self, g: Graph, sc: ScaleStructures, header: LabelHeader):
        self.g = g
        self.sc = sc
        self.header = header
        self.incident = [incident_edges(g, s) for s in sc.clusters]
        self.fingerprints = [self._fingerprint(v) for v in range(g.n)]
        self.edge_fps = {
            e.id: EdgeFingerprint(e.id, e.length, self.fingerprints[e.u], self.fingerprints[e.v]) for e in g.edges
        }

    def _fingerprint(self, v: int) -> VertexFingerprint:
        sc = self.sc
        entries = []
        for cid in sc.clusters_of.get(v, []):
            tour = sc.trees[cid].tour
            entries.append(
                ClusterEntry(
                    cid,
                    len(sc.clusters[cid]),
                    sc.levels[cid],
                    tour.start[v],
                    tour.end[v],
                    sc.cluster_mass[cid],
                    sc.subtree_mass[cid][v],
                )
            )
        return VertexFingerprint(v, tuple(entries))

    def vlabel_scale(self, v: int) -> VLabelScale:
        sc = self.sc
        edges: set[int] = set()
        for cid in sc.clusters_of.get(v, []):
            for j, mass in enumerate(sc.cluster_mass[cid]):
                if mass <= sc.tau_heavy:
                    edges |= sc.sampled[j] & self.incident[cid]
        return VLabelScale(
            sc.index, sc.tau_heavy, self.fingerprints[v], tuple(self.edge_fps[eid] for eid in sorted(edges))
        )

    def elabel_scale(self, eid: int) -> tuple[ELabelScale | None, set[int]]:
        sc = self.sc
        e = self.g.edge_by_id[eid]
        pair = frozenset((e.u, e.v))
        clusters = [cid for cid, tree in enumerate(sc.trees) if pair in tree.edge_pairs]
        if not clusters:
            return None, set()
        intervals = []
        stored: set[int] = {eid}
        owners: set[int] = set()
        for cid in clusters:
            tour = sc.trees[cid].tour
            for tail, head in sorted(((e.u, e.v), (e.v, e.u))):
                t = tour.pos[(tail, head)]
                for j, a in enumerate(sc.hierarchy.levels):
                    t_end = maximal_interval(tour, t, a, sc.tau_heavy)
                    window = incident_edges(self.g, tour.window(t, t_end))
                    chosen = tuple(sorted(sc.sampled[j] & window))
                    intervals.append(IntervalEntry(cid, tail, head, j, t, t_end, chosen))
                    stored.update(chosen)
                    for x in chosen:
                        ex = self.g.edge_by_id[x]
                        owners.update((ex.u, ex.v))
        return (
            ELabelScale(
                sc.index,
                self.edge_fps[eid],
                tuple(clusters),
                tuple(intervals),
                tuple(self.edge_fps[x] for x in sorted(stored)),
            ),
            owners,
        )


def assemble_labels(g: Graph, scales: Sequence[ScaleStructures], params: LabelParams) -> LabelSet:
    header = params.header
    assemblers = [_ScaleAssembler(g, sc, header) for sc in scales]
    vlabels = tuple(VLabel(v, header, tuple(asm.vlabel_scale(v) for asm in assemblers)) for v in range(g.n))
    elabels = {}
    for e in g.edges:
        parts = []
        owners: set[int] = set()
        for asm in assemblers:
            part, who = asm.elabel_scale(e.id)
            if part is not None:
                parts.append(part)
                owners |= who
        elabels[e.id] = ELabel(e.id, tuple(parts), tuple(vlabels[x] for x in sorted(owners)))
    return LabelSet(g.n, g.m, params, len(scales) - 1, vlabels, elabels, list(scales))


def build_labels(g: Graph, params: LabelParams | None = None) -> LabelSet:
    """Build every scale and assemble the labels."""
    params = params or LabelParams()
    if [e.id for e in g.edges] != list(range(g.m)):
        raise GraphError("edge ids must be 0..m-1 for labeling")
    paths = lexmax_paths(g)
    i_max = scale_count(g)
    scales = [build_scale_structures(g, i, params, paths) for i in range(i_max + 1)]
    labels = assemble_labels(g, scales, params)
    bound = sum(sc.cover_mass() for sc in scales)
    if labels.nontrivial_count() > bound:
        raise AssertionError(f"{labels.nontrivial_count()} non-trivial edge labels exceed bound {bound}")
    log.info(
        "labels: n=%d m=%d scales=%d non-trivial=%d bound=%d", g.n, g.m, i_max + 1, labels.nontrivial_count(), bound
    )
    return labels


def trivial_elabel(eid: int) -> ELabel:
    return ELabel(eid, (), ())
