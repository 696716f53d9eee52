"""Thorup-Zwick bunches and compiled failure sets behind the fast-query sensitivity oracle.

Compilation takes only the extended labels of the failed edges: it tabulates
decoder estimates between failed-edge endpoints and, per landmark, a
laminar family of their cluster-tree intervals. A query then finds the
Thorup-Zwick landmark for (p, q) and, when the tree path through it touches
a failed endpoint, bridges the first and last such endpoints by the table.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .decoder import UNREACHABLE, Decoder
from .errors import ConstructionError, ParseError, UsageError, VersionError
from .graph import INF, Graph, sssp
from .labels import ELabel, LabelSet, VLabel, trivial_elabel
from .serialize import Reader, Writer, dumps, encode_elabel, encode_vlabel, loads
from .trees import euler_tour

DEFAULT_C_BUNCH = 8
COMPILED_MAGIC = b"FTDC"
ORACLE_MAGIC = b"FTDO"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BunchEntry:
    distance: int
    start: int
    end: int


@dataclass(frozen=True)
class TZLabel:
    vertex: int
    pivots: tuple[int | None, ...]  # pivot_i for i < k; None when A_i is unreachable
    bunch: dict[int, BunchEntry]


@dataclass
class TZStructure:
    graph: Graph
    k: int
    levels: list[frozenset[int]]  # A_0 .. A_k
    dist: dict[int, list[float]]
    bunches: list[dict[int, int]]  # vertex -> {landmark: level}
    pivots: list[tuple[int | None, ...]]
    clusters: dict[int, frozenset[int]]
    tree_parent: dict[int, dict[int, int]]  # landmark -> child -> parent
    tours: dict[int, tuple[int, ...]]
    labels: list[TZLabel] = field(default_factory=list)

    def bunch(self, u: int) -> set[int]:
        return set(self.bunches[u])

    def estimate(self, p: int, q: int) -> float:
        return tz_query(self.labels[p], self.labels[q])


def bunch_cap(n: int, k: int, c_bunch: float = DEFAULT_C_BUNCH) -> float:
    return c_bunch * k * n ** (1.0 / k) * max(1.0, math.log(n)) if n > 1 else 1.0


def _nearest(dist_row: Sequence[float], members: Iterable[int], b: int) -> list[int]:
    ranked = sorted((dist_row[w], w) for w in members if dist_row[w] != INF)
    return [w for _, w in ranked[:b]]


def greedy_hitting_set(sets: Iterable[frozenset[int]]) -> frozenset[int]:
    """Repeatedly take the element in most unhit sets, lowest id on ties."""
    open_sets = [s for s in dict.fromkeys(sets) if s]
    chosen: set[int] = set()
    while open_sets:
        count: dict[int, int] = {}
        for s in open_sets:
            for x in s:
                count[x] = count.get(x, 0) + 1
        best = min(count, key=lambda x: (-count[x], x))
        chosen.add(best)
        open_sets = [s for s in open_sets if best not in s]
    return frozenset(chosen)


def landmark_levels(g: Graph, k: int, dist: dict[int, list[float]]) -> list[frozenset[int]]:
    """A_0 = V, A_{i+1} hits the ``b`` nearest A_i-vertices of every vertex that has ``b`` of them, A_k empty."""
    n = g.n
    b = max(1, math.ceil(n ** (1.0 / k) * (1 + math.log(max(n, 1)))))
    levels = [frozenset(range(n))]
    for _ in range(1, k):
        prev = levels[-1]
        balls = [frozenset(near) for v in range(n) if len(near := _nearest(dist[v], prev, b)) == b]
        levels.append(greedy_hitting_set(balls))
    levels.append(frozenset())
    return levels


def _cluster_tree(g: Graph, w: int, members: frozenset[int], dist_w: Sequence[float]) -> dict[int, int]:
    """Parent map of a shortest-path tree of ``members`` rooted at ``w``; lowest edge id among tight edges."""
    parent: dict[int, int] = {}
    for v in members:
        if v == w:
            continue
        tight = [(e.id, y) for y, e in g.adjacency[v] if y in members and dist_w[y] + e.length == dist_w[v]]
        if not tight:
            raise ConstructionError(f"cluster of {w} is not closed under shortest paths at {v}")
        parent[v] = min(tight)[1]
    return parent


def tz_build(g: Graph, k: int, c_bunch: float = DEFAULT_C_BUNCH) -> TZStructure:
    if k < 1:
        raise ValueError("k must be at least 1")
    n = g.n
    dist = {v: sssp(g, v) for v in range(n)}
    levels = landmark_levels(g, k, dist)
    cap = bunch_cap(n, k, c_bunch)

    def dist_to(v: int, level: frozenset[int]) -> float:
        return min((dist[v][w] for w in level), default=INF)

    bunches: list[dict[int, int]] = []
    pivots: list[tuple[int | None, ...]] = []
    for u in range(n):
        bunch: dict[int, int] = {}
        for i in range(k):
            limit = dist_to(u, levels[i + 1])
            for w in levels[i] - levels[i + 1]:
                if dist[u][w] < limit:
                    bunch[w] = i
        if len(bunch) > cap:
            raise ConstructionError(f"bunch of {u} has {len(bunch)} entries, cap {cap:.1f}")
        piv = []
        for i in range(k):
            cands = [(dist[u][w], w) for w in bunch if w in levels[i]]
            piv.append(min(cands)[1] if cands else None)
        bunches.append(bunch)
        pivots.append(tuple(piv))

    clusters: dict[int, set[int]] = {}
    for u, bunch in enumerate(bunches):
        for w in bunch:
            clusters.setdefault(w, set()).add(u)
    frozen = {w: frozenset(c) for w, c in sorted(clusters.items())}
    tree_parent = {}
    tours = {}
    for w, members in frozen.items():
        parent = _cluster_tree(g, w, members, dist[w])
        children: dict[int, list[int]] = {}
        for c, p in parent.items():
            children.setdefault(p, []).append(c)
        for kids in children.values():
            kids.sort()
        tree_parent[w] = parent
        tours[w] = euler_tour(w, children).sequence

    tz = TZStructure(g, k, levels, dist, bunches, pivots, frozen, tree_parent, tours)
    for u in range(n):
        entries = {}
        for w in sorted(bunches[u]):
            tour = tours[w]
            entries[w] = BunchEntry(dist[u][w], tour.index(u), len(tour) - 1 - tour[::-1].index(u))
        tz.labels.append(TZLabel(u, pivots[u], entries))
    return tz


def meeting_landmark(lp: TZLabel, lq: TZLabel) -> int | None:
    """Pivot of the lowest level lying in the other endpoint's bunch, trying p's pivot first."""
    for a, b in zip(lp.pivots, lq.pivots):
        if a is not None and a in lq.bunch:
            return a
        if b is not None and b in lp.bunch:
            return b
    return None


def tz_query(lp: TZLabel, lq: TZLabel) -> float:
    if lp.vertex == lq.vertex:
        return 0
    w = meeting_landmark(lp, lq)
    if w is None:
        return UNREACHABLE
    return lp.bunch[w].distance + lq.bunch[w].distance


# ---------------------------------------------------------------- laminar intervals


@dataclass(frozen=True)
class LaminarIntervals:
    """Shortest and longest stored interval containing a point, by lookup at critical points."""

    points: tuple[int, ...]
    shortest: tuple[int | None, ...]
    longest: tuple[int | None, ...]

    @classmethod
    def build(cls, intervals: dict[int, tuple[int, int]]) -> LaminarIntervals:
        pts = sorted({x for a, b in intervals.values() for x in (a - 1, a, b, b + 1)})
        short, long_ = [], []
        for x in pts:
            s, l_ = linear_scan(intervals, x)
            short.append(s)
            long_.append(l_)
        return cls(tuple(pts), tuple(short), tuple(long_))

    def query(self, x: int) -> tuple[int | None, int | None]:
        i = bisect.bisect_right(self.points, x) - 1
        if i < 0:
            return None, None
        return self.shortest[i], self.longest[i]


def linear_scan(intervals: dict[int, tuple[int, int]], x: int) -> tuple[int | None, int | None]:
    """(key of shortest, key of longest) interval containing x; ties to the lower key."""
    hits = sorted((b - a, key) for key, (a, b) in intervals.items() if a <= x <= b)
    if not hits:
        return None, None
    longest = min(hits, key=lambda t: (-t[0], t[1]))[1]
    return hits[0][1], longest


# ---------------------------------------------------------------- compile and fast query


@dataclass(frozen=True)
class ExtendedELabel:
    edge: int
    label: ELabel
    endpoint_vlabels: tuple[VLabel, VLabel]
    endpoint_tz: tuple[TZLabel, TZLabel]


@dataclass(frozen=True)
class CompiledOracle:
    failed: frozenset[int]
    endpoints: tuple[int, ...]
    table: dict[tuple[int, int], float]
    structures: dict[int, LaminarIntervals]

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(COMPILED_MAGIC)
        w.uint(FORMAT_VERSION)
        w.seq(sorted(self.failed), w.uint)
        w.seq(self.endpoints, w.uint)
        for s in self.endpoints:
            for t in self.endpoints:
                x = self.table[(s, t)]
                w.uint(0 if x == UNREACHABLE else int(x) + 1)
        w.uint(len(self.structures))
        for landmark in sorted(self.structures):
            st = self.structures[landmark]
            w.uint(landmark)
            w.uint(len(st.points))
            for x, a, b in zip(st.points, st.shortest, st.longest):
                w.uint(x + 1)  # points can be -1
                _put_optional(w, a)
                _put_optional(w, b)
        return w.bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> CompiledOracle:
        r = _open(data, COMPILED_MAGIC, "compiled oracle")
        failed = frozenset(r.seq(r.uint))
        endpoints = r.seq(r.uint)
        table: dict[tuple[int, int], float] = {}
        for s in endpoints:
            for t in endpoints:
                x = r.uint()
                table[(s, t)] = UNREACHABLE if x == 0 else x - 1
        structures = {}
        for _ in range(r.uint()):
            landmark = r.uint()
            rows = r.seq(lambda: (r.uint() - 1, _get_optional(r), _get_optional(r)))
            structures[landmark] = LaminarIntervals(
                tuple(x for x, _, _ in rows), tuple(a for _, a, _ in rows), tuple(b for _, _, b in rows)
            )
        r.done()
        return cls(failed, endpoints, table, structures)


def _put_optional(w: Writer, x: int | None) -> None:
    w.uint(0 if x is None else x + 1)


def _get_optional(r: Reader) -> int | None:
    x = r.uint()
    return None if x == 0 else x - 1


def _open(data: bytes, magic: bytes, what: str) -> Reader:
    data = bytes(data)
    if data[: len(magic)] != magic:
        raise VersionError(f"bad magic for {what}", 0)
    r = Reader(data)
    r.pos = len(magic)
    version = r.uint()
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported {what} format version {version}", len(magic))
    return r


def encode_tz_label(label: TZLabel) -> bytes:
    w = Writer()
    w.uint(label.vertex)
    w.seq(label.pivots, lambda x: _put_optional(w, x))
    w.uint(len(label.bunch))
    for landmark in sorted(label.bunch):
        entry = label.bunch[landmark]
        for x in (landmark, entry.distance, entry.start, entry.end):
            w.uint(x)
    return w.bytes()


def decode_tz_label(r: Reader) -> TZLabel:
    vertex = r.uint()
    pivots = r.seq(lambda: _get_optional(r))
    bunch = {}
    for _ in range(r.uint()):
        landmark = r.uint()
        bunch[landmark] = BunchEntry(r.uint(), r.uint(), r.uint())
    return TZLabel(vertex, pivots, bunch)


def compile_failures(f_labels: Sequence[ExtendedELabel]) -> CompiledOracle:
    failed = frozenset(e.edge for e in f_labels)
    vlabels: dict[int, VLabel] = {}
    tzlabels: dict[int, TZLabel] = {}
    for e in f_labels:
        for vl, tl in zip(e.endpoint_vlabels, e.endpoint_tz):
            vlabels[vl.vertex] = vl
            tzlabels[tl.vertex] = tl
    endpoints = tuple(sorted(vlabels))
    dec = Decoder([e.label for e in f_labels])
    table: dict[tuple[int, int], float] = {}
    for x, s in enumerate(endpoints):
        table[(s, s)] = 0
        for t in endpoints[x + 1 :]:
            table[(s, t)] = table[(t, s)] = dec.distance(vlabels[s], vlabels[t])
    intervals: dict[int, dict[int, tuple[int, int]]] = {}
    for s in endpoints:
        for w, entry in tzlabels[s].bunch.items():
            intervals.setdefault(w, {})[s] = (entry.start, entry.end)
    structures = {w: LaminarIntervals.build(iv) for w, iv in sorted(intervals.items())}
    return CompiledOracle(failed, endpoints, table, structures)


def fast_query(oracle: CompiledOracle, lp: TZLabel, lq: TZLabel) -> float:
    if lp.vertex == lq.vertex:
        return 0
    w = meeting_landmark(lp, lq)
    if w is None:
        return UNREACHABLE
    through = lp.bunch[w].distance + lq.bunch[w].distance
    st = oracle.structures.get(w)
    if st is None:
        return through
    p_first, p_last = st.query(lp.bunch[w].start)
    q_first, q_last = st.query(lq.bunch[w].start)
    # walk p -> w -> q: first failed endpoint is nearest p on its root path, else highest on q's
    s_p = p_first if p_first is not None else q_last
    s_q = q_first if q_first is not None else p_last
    if s_p is None:
        return through
    bridge = oracle.table[(s_p, s_q)]
    return UNREACHABLE if bridge == UNREACHABLE else through + bridge


# ---------------------------------------------------------------- sensitivity oracles


def extended_elabels(g: Graph, labels: LabelSet, tz: TZStructure) -> dict[int, ExtendedELabel]:
    out = {}
    for e in g.edges:
        out[e.id] = ExtendedELabel(
            e.id,
            labels.elabel(e.id),
            (labels.vlabels[e.u], labels.vlabels[e.v]),
            (tz.labels[e.u], tz.labels[e.v]),
        )
    return out


class SensitivityOracle:
    """Stores vertex labels, non-trivial edge labels and an edge endpoint table.

    ``query`` answers through the decoder; ``set_failures`` compiles and
    ``distance`` answers fast queries against the current failure set.
    """

    def __init__(self, labels: LabelSet, k: int, tz_labels: Sequence[TZLabel], endpoints: Sequence[tuple[int, int]]):
        if len(tz_labels) != labels.n or len(endpoints) != labels.m:
            raise UsageError("distance labels, TZ labels and endpoint table disagree on n or m")
        self.labels = labels
        self.k = k
        self.vlabels = labels.vlabels
        self.elabels = {eid: e for eid, e in labels.elabels.items() if not e.trivial}
        self.tz_labels = tuple(tz_labels)
        self.endpoints = tuple(endpoints)
        self.compiled: CompiledOracle | None = None

    @classmethod
    def store(cls, g: Graph, labels: LabelSet, tz: TZStructure) -> SensitivityOracle:
        return cls(labels, tz.k, tz.labels, [(e.u, e.v) for e in g.edges])

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(ORACLE_MAGIC)
        w.uint(FORMAT_VERSION)
        w.record(dumps(self.labels))
        w.uint(self.k)
        for label in self.tz_labels:
            w.record(encode_tz_label(label))
        for u, v in self.endpoints:
            w.uint(u)
            w.uint(v)
        return w.bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> SensitivityOracle:
        r = _open(data, ORACLE_MAGIC, "oracle container")
        store = r.record()
        try:
            labels = loads(store.data)
        except ParseError as exc:
            reason = str(exc).rsplit(" (at byte offset", 1)[0]
            raise ParseError(f"embedded label store: {reason}", store.base + exc.offset) from None
        k = r.uint()
        tz_labels = []
        for v in range(labels.n):
            sub = r.record()
            label = decode_tz_label(sub)
            sub.done()
            if label.vertex != v:
                raise sub.fail(f"TZ label {label.vertex} out of order (expected {v})")
            tz_labels.append(label)
        endpoints = tuple((r.uint(), r.uint()) for _ in range(labels.m))
        if any(not (0 <= x < labels.n) for pair in endpoints for x in pair):
            raise r.fail("edge endpoint out of range")
        r.done()
        return cls(labels, k, tz_labels, endpoints)

    def elabel(self, eid: int) -> ELabel:
        if not 0 <= eid < len(self.endpoints):
            raise KeyError(f"unknown edge id {eid}")
        return self.elabels.get(eid) or trivial_elabel(eid)

    def extended(self, eid: int) -> ExtendedELabel:
        label = self.elabel(eid)
        u, v = self.endpoints[eid]
        return ExtendedELabel(eid, label, (self.vlabels[u], self.vlabels[v]), (self.tz_labels[u], self.tz_labels[v]))

    def query(self, p: int, q: int, failures: Iterable[int]) -> float:
        return Decoder([self.elabel(e) for e in sorted(set(failures))]).distance(self.vlabels[p], self.vlabels[q])

    def set_failures(self, failures: Iterable[int]) -> CompiledOracle:
        self.compiled = compile_failures([self.extended(e) for e in sorted(set(failures))])
        return self.compiled

    def distance(self, p: int, q: int, failures: Iterable[int] | None = None) -> float:
        if self.compiled is None:
            raise UsageError("no failure set compiled")
        if failures is not None and frozenset(failures) != self.compiled.failed:
            raise UsageError("query failure set differs from the compiled one")
        return fast_query(self.compiled, self.tz_labels[p], self.tz_labels[q])

    def size_report(self) -> dict:
        return {
            "vertex_label_bytes": sum(len(encode_vlabel(v)) for v in self.vlabels),
            "stored_edge_labels": len(self.elabels),
            "edge_label_bytes": sum(len(encode_elabel(e)) for e in self.elabels.values()),
            "tz_bunch_entries": sum(len(t.bunch) for t in self.tz_labels),
            "endpoint_table_entries": len(self.endpoints),
        }
