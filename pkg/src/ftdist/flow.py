"""Length-constrained routing, LDD demands and the cut-or-certify loop.

Routing is solved as a path-based minimum-congestion LP over every simple
path within the length bound. The LP runs in floating point (HiGHS via
scipy); the returned flow is snapped to rationals and re-verified exactly,
so every certificate rests on an explicit exact flow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import isqrt

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .covers import DEFAULT_C_OMEGA, NeighborhoodCover, build_cover
from .errors import ResourceError
from .graph import INF, Demand, Graph, MovingCut, NodeWeighting, all_pairs, apply_cut, sssp

log = logging.getLogger(__name__)

DEFAULT_PATH_CAP = 200_000
_SNAP_DENOMINATOR = 1 << 24

Path = tuple[int, ...]


@dataclass(frozen=True)
class RoutingResult:
    feasible: bool
    congestion: Fraction | float
    flow: dict[tuple[int, int, Path], Fraction]
    max_length: int
    path_count: int = 0
    dual: dict[int, float] = field(default_factory=dict, compare=False, repr=False)

    def edge_loads(self, g: Graph) -> dict[int, Fraction]:
        loads: dict[int, Fraction] = {}
        for (_, _, path), x in self.flow.items():
            for eid in path:
                loads[eid] = loads.get(eid, Fraction(0)) + x
        return loads


@dataclass(frozen=True)
class CutCertificate:
    """Either an expansion certificate (``cut is None``) or a sparse cut with its witness."""

    cut: MovingCut | None
    witness: Demand | None
    sparsity: Fraction | float  # spars_{hs}(cut, witness); INF for certificates
    congestion: Fraction | float  # best exact congestion found for the LDD demand
    congestion_budget: Fraction  # 1 / (4 * omega * phi)
    length_budget: Fraction  # (s / 4) * h
    omega: int

    @property
    def certified(self) -> bool:
        return self.cut is None


@dataclass
class CutCounter:
    """Counts nonzero cut increments across a monotone sequence of calls."""

    nonzero: int = 0
    calls: int = 0
    history: list[tuple[MovingCut, Fraction | float]] = field(default_factory=list)


def enumerate_paths(g: Graph, s: int, t: int, bound: int, budget: int) -> list[Path]:
    """All simple (s, t)-paths of length at most ``bound``, as edge-id tuples."""
    to_t = sssp(g, t)
    if to_t[s] > bound:
        return []
    out: list[Path] = []
    on_path = [False] * g.n
    on_path[s] = True
    edges: list[int] = []
    adj = g.adjacency

    def walk(x: int, used: int) -> None:
        if x == t:
            out.append(tuple(edges))
            if len(out) > budget:
                raise ResourceError(f"path enumeration exceeded cap of {budget} paths")
            return
        for y, e in adj[x]:
            nxt = used + e.length
            if on_path[y] or nxt + to_t[y] > bound:
                continue
            on_path[y] = True
            edges.append(e.id)
            walk(y, nxt)
            edges.pop()
            on_path[y] = False

    walk(s, 0)
    return out


def path_length(g: Graph, path: Path) -> int:
    return sum(g.edge_by_id[eid].length for eid in path)


def _effective_bound(g: Graph, bound: Fraction | int | float) -> int:
    if bound == INF:
        return sum(e.length for e in g.edges)
    return min(math.floor(bound), sum(e.length for e in g.edges))


def route_lp(g: Graph, d: Demand, h: Fraction | int | float, path_cap: int = DEFAULT_PATH_CAP) -> RoutingResult:
    """Minimum-congestion routing of ``d`` on simple paths of length at most ``h``."""
    if h < 0:
        return RoutingResult(False, INF, {}, 0)
    items = tuple(sorted(d.items()))
    return _route_cached(g, items, _effective_bound(g, h), path_cap)


@lru_cache(maxsize=8192)
def _route_cached(g: Graph, items: tuple, bound: int, path_cap: int) -> RoutingResult:
    flow: dict[tuple[int, int, Path], Fraction] = {}
    commodities = []
    for (u, v), x in items:
        if u == v:
            flow[(u, v, ())] = x
        else:
            commodities.append((u, v, x))
    if not commodities:
        return RoutingResult(True, Fraction(0), flow, 0)

    paths: list[list[Path]] = []
    remaining = path_cap
    for u, v, _ in commodities:
        ps = enumerate_paths(g, u, v, bound, remaining)
        if not ps:
            return RoutingResult(False, INF, {}, 0)
        remaining -= len(ps)
        paths.append(ps)

    columns = [(k, p) for k, ps in enumerate(paths) for p in ps]
    edge_ids = sorted({eid for _, p in columns for eid in p})
    row_of = {eid: i for i, eid in enumerate(edge_ids)}
    ncol = len(columns) + 1

    rows, cols, vals = [], [], []
    for j, (_, p) in enumerate(columns):
        for eid in p:
            rows.append(row_of[eid])
            cols.append(j)
            vals.append(1.0)
    for eid, i in row_of.items():
        rows.append(i)
        cols.append(ncol - 1)
        vals.append(-float(g.edge_by_id[eid].capacity))
    a_ub = csr_matrix((vals, (rows, cols)), shape=(len(edge_ids), ncol))
    eq_rows = [k for k, _ in columns]
    a_eq = csr_matrix(([1.0] * len(columns), (eq_rows, list(range(len(columns))))), shape=(len(commodities), ncol))
    b_eq = np.array([float(x) for _, _, x in commodities])
    cost = np.zeros(ncol)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(len(edge_ids)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ResourceError(f"LP backend failed: {res.message}")

    x = res.x
    j = 0
    for k, (u, v, demand) in enumerate(commodities):
        ps = paths[k]
        snapped = [Fraction(max(0.0, float(x[j + i]))).limit_denominator(_SNAP_DENOMINATOR) for i in range(len(ps))]
        j += len(ps)
        total = sum(snapped, Fraction(0))
        if total == 0:
            snapped = [Fraction(0)] * len(ps)
            snapped[min(range(len(ps)), key=lambda i: path_length(g, ps[i]))] = demand
        else:
            snapped = [y * demand / total for y in snapped]
        for p, y in zip(ps, snapped):
            if y:
                flow[(u, v, p)] = y

    loads: dict[int, Fraction] = {}
    for (_, _, p), y in flow.items():
        for eid in p:
            loads[eid] = loads.get(eid, Fraction(0)) + y
    congestion = max((y / g.edge_by_id[eid].capacity for eid, y in loads.items()), default=Fraction(0))
    longest = max((path_length(g, p) for _, _, p in flow), default=0)
    dual = {eid: max(0.0, -float(res.ineqlin.marginals[i])) for eid, i in row_of.items()}
    return RoutingResult(True, congestion, flow, longest, len(columns), dual)


def ldd_demand(a: NodeWeighting, cover: NeighborhoodCover) -> Demand:
    """(1/omega) * sum over clusters of A(u)A(v) / (2 A(S)), over ordered pairs in S."""
    omega = cover.width
    acc: dict[tuple[int, int], Fraction] = {}
    for clustering in cover.clusterings:
        for s in clustering:
            total = a.mass(s)
            if total == 0:
                continue
            members = sorted(v for v in s if a(v))
            for u in members:
                for v in members:
                    acc[(u, v)] = acc.get((u, v), Fraction(0)) + a(u) * a(v) / (2 * total * omega)
    return Demand(acc, h=cover.h_diam)


def shortest_path_routing(g: Graph, d: Demand, bound: int) -> RoutingResult:
    """Route every commodity on one shortest path; exact congestion."""
    flow: dict[tuple[int, int, Path], Fraction] = {}
    by_source: dict[int, list[tuple[int, Fraction]]] = {}
    for (u, v), x in d.items():
        by_source.setdefault(u, []).append((v, x))
    for u, targets in by_source.items():
        dist = sssp(g, u)
        pred: list[int | None] = [None] * g.n
        for x in sorted(range(g.n), key=lambda y: dist[y]):
            for y, e in g.adjacency[x]:
                if dist[x] + e.length == dist[y] and pred[y] is None and y != u:
                    pred[y] = e.id
        for v, x in targets:
            if dist[v] > bound:
                return RoutingResult(False, INF, {}, 0)
            path: list[int] = []
            y = v
            while y != u:
                eid = pred[y]
                path.append(eid)
                y = g.edge_by_id[eid].other(y)
            key = (u, v, tuple(reversed(path)))
            flow[key] = flow.get(key, Fraction(0)) + x
    loads: dict[int, Fraction] = {}
    for (_, _, p), x in flow.items():
        for eid in p:
            loads[eid] = loads.get(eid, Fraction(0)) + x
    congestion = max((x / g.edge_by_id[eid].capacity for eid, x in loads.items()), default=Fraction(0))
    longest = max((path_length(g, p) for _, _, p in flow), default=0)
    return RoutingResult(True, congestion, flow, longest, len(flow))


def _separated(g: Graph, cut: MovingCut, d: Demand, threshold: int) -> tuple[list[tuple[int, int]], Fraction]:
    cut_graph = apply_cut(g, cut, cut.h)
    dist = all_pairs(cut_graph, {u for u, _ in d})
    pairs = [(u, v) for (u, v) in d if dist[u][v] > threshold]
    return pairs, sum((d[p] for p in pairs), Fraction(0))


def _cut_from_lengths(g: Graph, y: dict[int, float], scale: float, grid: int) -> MovingCut:
    values = {}
    for eid, ye in y.items():
        steps = min(grid, math.ceil(ye * scale * grid - 1e-9))
        if steps > 0:
            values[eid] = Fraction(steps, grid)
    return MovingCut(grid, values)


def extract_cut(
    g: Graph, d: Demand, routing: RoutingResult | None, h: int, s: int
) -> tuple[MovingCut, Demand, Fraction]:
    """Round LP dual lengths into an hs-length cut that separates part of ``d``.

    Candidate scalings make each commodity's cheapest admissible path reach
    dual length 1; the sparsest candidate wins. When no candidate separates
    anything the cut saturates every edge, which separates every pair.
    """
    grid = h * s
    candidates: list[MovingCut] = []
    if routing is not None and routing.feasible and routing.dual:
        y = routing.dual
        reach: dict[tuple[int, int], float] = {}
        for u, v, p in routing.flow:
            if u != v:
                cost = sum(y.get(eid, 0.0) for eid in p)
                reach[(u, v)] = min(reach.get((u, v), math.inf), cost)
        scales = sorted({1.0 / c for c in reach.values() if c > 1e-12})
        for scale in scales[:24]:
            for mult in (1.0, 2.0):
                cut = _cut_from_lengths(g, y, scale * mult, grid)
                if not cut.is_zero() and cut not in candidates:
                    candidates.append(cut)
        support = {eid: 1.0 for eid, ye in y.items() if ye > 1e-12}
        if support:
            candidates.append(_cut_from_lengths(g, support, 1.0, grid))
    candidates.append(MovingCut(grid, {e.id: 1 for e in g.edges}))

    best = None
    for cut in candidates:
        pairs, sep = _separated(g, cut, d, grid)
        if sep == 0:
            continue
        sparsity = cut.size(g) / sep
        if best is None or sparsity < best[2]:
            best = (cut, d.restrict(pairs), sparsity)
    assert best is not None, "saturating cut must separate a nonempty demand"
    witness = Demand(dict(best[1].items()), h=d.h)
    return best[0], witness, best[2]


def cut_or_certify(
    g: Graph,
    a: NodeWeighting,
    h: int,
    s: int,
    s_prime: int,
    phi: Fraction,
    c_omega: float = DEFAULT_C_OMEGA,
    path_cap: int = DEFAULT_PATH_CAP,
) -> CutCertificate:
    """Certify (h, s)-length phi-expansion of ``a`` or return a sparse hs-length cut.

    The certificate is an exact routing of the LDD demand of an (h, h*s')
    cover with congestion at most 1/(4 omega phi) on paths of length at most
    (s/4) h.
    """
    if s_prime < 4 or s < 8 * s_prime:
        raise ValueError("cut_or_certify needs s' >= 4 and s >= 8 s'")
    phi = Fraction(phi)
    cover = build_cover(g, h, s_prime, c_omega)
    demand = ldd_demand(a, cover)
    budget = 1 / (4 * cover.width * phi)
    length_budget = Fraction(s, 4) * h
    offdiag = Demand(demand.off_diagonal())
    if not offdiag:
        return CutCertificate(None, None, INF, Fraction(0), budget, length_budget, cover.width)

    bound = math.floor(length_budget)
    quick = shortest_path_routing(g, offdiag, bound)
    if quick.feasible and quick.congestion <= budget:
        return CutCertificate(None, None, INF, quick.congestion, budget, length_budget, cover.width)
    routing = route_lp(g, offdiag, bound, path_cap)
    if routing.feasible and routing.congestion <= budget:
        return CutCertificate(None, None, INF, routing.congestion, budget, length_budget, cover.width)

    cut, witness, sparsity = extract_cut(g, offdiag, routing, h, s)
    congestion = routing.congestion if routing.feasible else INF
    return CutCertificate(cut, witness, sparsity, congestion, budget, length_budget, cover.width)


def slack_split(s: int, mode: str) -> int:
    """s' used for each call: sqrt(s) in poly mode, the minimum 4 in exist mode."""
    if mode == "poly":
        return isqrt(s)
    if mode == "exist":
        return 4
    raise ValueError(f"unknown mode {mode!r}")


def cut_until_certify(
    g: Graph,
    a: NodeWeighting,
    h: int,
    s: int,
    phi: Fraction,
    mode: str = "poly",
    base: MovingCut | None = None,
    counter: CutCounter | None = None,
    c_omega: float = DEFAULT_C_OMEGA,
    path_cap: int = DEFAULT_PATH_CAP,
) -> MovingCut:
    """Grow a cut until ``a`` is certified expanding in g - (base + cut).

    ``base`` is a cut already applied to ``g``; the returned increment keeps
    ``base + increment`` within [0, 1].
    """
    grid = h * s
    base = base if base is not None else MovingCut(grid)
    counter = counter if counter is not None else CutCounter()
    s_prime = slack_split(s, mode)
    total = MovingCut(grid)
    while True:
        current = base + total
        counter.calls += 1
        cert = cut_or_certify(apply_cut(g, current, grid), a, h, s, s_prime, phi, c_omega, path_cap)
        if cert.certified:
            return total
        room = {eid: min(x, 1 - current(eid)) for eid, x in cert.cut.items()}
        step = MovingCut(grid, room)
        if step.is_zero():
            raise AssertionError("sparse cut made no progress")
        counter.nonzero += 1
        counter.history.append((step, cert.sparsity))
        total = total + step


def union_cut_diagnostic(
    g0: Graph,
    a: NodeWeighting,
    cuts: list[tuple[MovingCut, Fraction | float]],
    h: int,
    s: int,
) -> dict:
    """Potential-based accounting for a sequence of sparse cuts.

    P_i = sum_v A(v) ln(sum_u w_i(v, u)) with w_i(v, u) = n^(-2 dist/(hs))
    for dist <= hs/2 and 0 otherwise. The potential never increases because
    distances only grow.
    """
    n = g0.n
    hs = h * s

    def potential(g: Graph) -> float:
        terms = []
        for v in range(n):
            if not a(v):
                continue
            dist = sssp(g, v)
            w = math.fsum(n ** (-2 * d / hs) for d in dist if d != INF and 2 * d <= hs)
            terms.append(float(a(v)) * math.log(w))
        return math.fsum(terms)

    steps = []
    graph = g0
    potentials = [potential(graph)]
    ratio_sum = Fraction(0)
    for cut, phi in cuts:
        graph = apply_cut(graph, cut, cut.h)
        size = cut.size(g0)
        ratio = size / phi if phi not in (0, INF) else Fraction(0)
        ratio_sum += ratio
        potentials.append(potential(graph))
        steps.append({"cut_size": str(size), "phi": str(phi), "ratio": str(ratio), "potential": potentials[-1]})
    monotone = all(p1 <= p0 for p0, p1 in zip(potentials, potentials[1:]))
    a_ln_n = float(a.total()) * math.log(n) if n > 1 else 0.0
    report = {
        "steps": steps,
        "initial_potential": potentials[0],
        "sum_ratio": str(ratio_sum),
        "sum_ratio_float": float(ratio_sum),
        "a_ln_n": a_ln_n,
        "potential_monotone": monotone,
    }
    log.info("union-of-cuts: sum |C|/phi = %s vs |A| ln n = %.3f", ratio_sum, a_ln_n)
    if not monotone:
        raise AssertionError(f"potential increased along the cut sequence: {potentials}")
    return report
