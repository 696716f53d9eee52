"""Seeded instance generation, brute-force ground truth and validation sweeps."""

from __future__ import annotations

import itertools
import json
import logging
import math
import random
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

from .decoder import UNREACHABLE, Decoder, discovered_distances
from .errors import FtdistError
from .flow import union_cut_diagnostic
from .graph import INF, Edge, Graph, NodeWeighting, sssp
from .hierarchy import validate_hierarchy
from .hitting import incident_edges, p_violation, q_violation, tail_probability
from .labels import LabelParams, LabelSet, ScaleStructures, build_labels
from .serialize import dumps, label_sizes
from .trees import EulerTour, TourRecord, euler_tour, maximal_interval, recover_components
from .tz import SensitivityOracle, tz_build, tz_query

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Profile:
    graphs: int = 200
    n_max: int = 12
    m_max: int = 20
    max_length: int = 8
    f: int = 2
    s_nc: int = 2
    s_ed: int = 100
    d: int = 2
    c_tau: int = 4
    ks: tuple[int, ...] = (1, 2, 3)
    seed: int = 0
    pack_samples: int = 50
    euler_instances: int = 1000
    euler_n_max: int = 40
    tz_graphs: int = 20
    tz_n_max: int = 50
    dp_systems: int = 200
    determinism: bool = True

    def label_params(self) -> LabelParams:
        return LabelParams(f=self.f, s_nc=self.s_nc, s_ed=self.s_ed, d=self.d, c_tau=self.c_tau)

    @property
    def stretch(self) -> int:
        return self.label_params().stretch


DEFAULT_PROFILE = Profile()


@dataclass(frozen=True)
class TestInstance:
    seed: int
    graph: Graph
    failure_sets: tuple[tuple[int, ...], ...]
    pairs: tuple[tuple[int, int], ...]
    profile: Profile


def generate_graph(seed: int, n_max: int = 12, m_max: int = 20, max_length: int = 8) -> Graph:
    """Random multigraph; n in [1, n_max], m in [0, m_max], mostly connected via a random spanning forest."""
    rng = random.Random(seed)
    n = rng.randint(1, n_max)
    m = rng.randint(0, m_max) if n > 1 else 0
    pairs: list[tuple[int, int]] = []
    for v in range(1, n):
        if len(pairs) < m and rng.random() < 0.85:
            pairs.append((rng.randrange(v), v))
    while len(pairs) < m:
        u, v = rng.sample(range(n), 2)
        pairs.append((u, v))
    rng.shuffle(pairs)
    return Graph(n, tuple(Edge(i, u, v, rng.randint(1, max_length)) for i, (u, v) in enumerate(pairs)))


def failure_sets(g: Graph, f: int) -> list[tuple[int, ...]]:
    return [fs for k in range(min(f, g.m) + 1) for fs in itertools.combinations(range(g.m), k)]


def generate_instance(seed: int, profile: Profile = DEFAULT_PROFILE) -> TestInstance:
    g = generate_graph(seed, profile.n_max, profile.m_max, profile.max_length)
    pairs = tuple((p, q) for p in range(g.n) for q in range(g.n))
    return TestInstance(seed, g, tuple(failure_sets(g, profile.f)), pairs, profile)


def brute_distance(g: Graph, failures: Iterable[int], p: int, q: int) -> float:
    """Exact dist_{G - F}(p, q) by Dijkstra; INF when unreachable."""
    return sssp(g.without_edges(failures), p)[q]


def enumerate_distance(g: Graph, failures: Iterable[int], p: int, q: int) -> float:
    """Minimum length over all simple paths, by exhaustive search."""
    gone = set(failures)
    best = INF

    def walk(x: int, seen: set[int], length: int) -> None:
        nonlocal best
        if x == q:
            best = min(best, length)
            return
        for y, e in g.adjacency[x]:
            if e.id not in gone and y not in seen:
                seen.add(y)
                walk(y, seen, length + e.length)
                seen.remove(y)

    walk(p, {p}, 0)
    return best


# ---------------------------------------------------------------- per-scale checks


ENUMERATION_LIMIT = 12


def enumerate_tail(rhos: Sequence[Fraction], need: int) -> Fraction:
    """Pr[at least ``need`` successes] by summing over all 2^k outcomes."""
    total = Fraction(0)
    for outcome in itertools.product((0, 1), repeat=len(rhos)):
        if sum(outcome) >= need:
            p = Fraction(1)
            for bit, rho in zip(outcome, rhos):
                p *= rho if bit else 1 - rho
            total += p
    return total


def check_hitting(sc: ScaleStructures) -> dict:
    """Every P-set hit, every Q-set within alpha, expectation trace nonincreasing and at most 1/2.

    Violation probabilities of constraints with few elements are replayed
    against outcome enumeration.
    """
    ok = True
    replayed = 0
    for cs, sel in zip(sc.constraints[1:], sc.selections[1:]):
        chosen = sel.selected
        ok &= all(p & chosen for p in cs.p_sets)
        ok &= all(len(q & chosen) <= sel.alpha for q in cs.q_sets)
        ok &= all(a >= b for a, b in zip(sel.trace, sel.trace[1:]))
        ok &= sel.trace[0] <= Fraction(1, 2)
        if cs.m == 0:
            continue
        rho = {e: cs.rho(e, sel.beta) for e in cs.elements}
        for p in cs.p_sets:
            if len(p) <= ENUMERATION_LIMIT:
                ok &= p_violation(p, {}, rho) == 1 - enumerate_tail([rho[e] for e in sorted(p)], 1)
                replayed += 1
        for q in cs.q_sets:
            if len(q) <= ENUMERATION_LIMIT:
                need = math.floor(sel.alpha) + 1
                ok &= q_violation(q, {}, rho, sel.alpha) == enumerate_tail([rho[e] for e in sorted(q)], need)
                replayed += 1
    return {"scale": sc.index, "passed": bool(ok), "replayed": replayed}


def dp_suite(systems: int, seed: int) -> dict:
    """Tail DP and conditional violation probabilities against enumeration on random small systems."""
    rng = random.Random(seed)
    mismatches = 0
    for _ in range(systems):
        k = rng.randint(0, ENUMERATION_LIMIT)
        rhos = [Fraction(rng.randint(0, 8), 8) for _ in range(k)]
        need = rng.randint(0, k + 1)
        mismatches += tail_probability(rhos, need) != enumerate_tail(rhos, need)
        items = frozenset(range(k))
        rho = dict(enumerate(rhos))
        fixed = {e: rng.randint(0, 1) for e in items if rng.random() < 0.3}
        open_rhos = [rho[e] for e in sorted(items) if e not in fixed]
        hit = sum(fixed.values())
        alpha = Fraction(rng.randint(0, 2 * k + 2), 2)
        expected_q = enumerate_tail(open_rhos, math.floor(alpha) + 1 - hit)
        mismatches += q_violation(items, fixed, rho, alpha) != expected_q
        expected_p = Fraction(0) if hit else 1 - enumerate_tail(open_rhos, 1)
        mismatches += p_violation(items, fixed, rho) != expected_p
    return {"systems": systems, "mismatches": mismatches, "passed": mismatches == 0}


def check_hierarchy(sc: ScaleStructures) -> dict:
    report = validate_hierarchy(sc.hierarchy)
    return {"scale": sc.index, **report}


def tree_components(sc: ScaleStructures, cid: int, failed_pairs: set[frozenset[int]]) -> list[frozenset[int]]:
    """Union-find components of T_S after removing failed vertex pairs."""
    tree = sc.trees[cid]
    root = {v: v for v in tree.cluster}

    def find(x: int) -> int:
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for c, (p, _) in tree.parent.items():
        if frozenset((c, p)) not in failed_pairs:
            root[find(c)] = find(p)
    groups: dict[int, set[int]] = {}
    for v in tree.cluster:
        groups.setdefault(find(v), set()).add(v)
    return [frozenset(s) for s in groups.values()]


def check_light_components(g: Graph, labels: LabelSet, failures: Sequence[int], waypoints: Iterable[int]) -> bool:
    """Every L_j edge touching an A_j-light component of a waypoint's cluster is fingerprinted,
    with both endpoints waypoints when the component is a strict subset."""
    assert labels.scales is not None
    wp = set(waypoints)
    failed_pairs = {frozenset((g.edge_by_id[e].u, g.edge_by_id[e].v)) for e in failures}
    for sc in labels.scales:
        i = sc.index
        printed: set[int] = set()
        for w in wp:
            part = next(p for p in labels.vlabels[w].scales if p.scale == i)
            printed.update(e.edge for e in part.edges)
        for e in failures:
            part = labels.elabel(e).by_scale.get(i)
            if part is not None:
                printed.update(x.edge for x in part.edge_fps)
        for cid, s in enumerate(sc.clusters):
            if not s & wp:
                continue
            for comp in tree_components(sc, cid, failed_pairs):
                touching = incident_edges(g, comp)
                for j, a in enumerate(sc.hierarchy.levels):
                    if a.mass(comp) > sc.tau_heavy:
                        continue
                    needed = sc.sampled[j] & touching
                    if not needed <= printed:
                        return False
                    if comp != s:
                        ends = {x for eid in needed for x in (g.edge_by_id[eid].u, g.edge_by_id[eid].v)}
                        if not ends <= wp:
                            return False
    return True


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepStats:
    queries: int = 0
    unreachable_mismatch: int = 0
    literal_violations: int = 0  # not (est <= dist <= est * s)
    lower_violations: int = 0  # est < dist
    upper_violations: int = 0  # est > s * dist
    exact: int = 0
    max_ratio: float = 1.0
    fast_queries: int = 0
    fast_violations: int = 0
    fast_max_ratio: float = 1.0
    failures: list[str] = field(default_factory=list)

    def merge(self, other: SweepStats) -> None:
        for name in (
            "queries",
            "unreachable_mismatch",
            "literal_violations",
            "lower_violations",
            "upper_violations",
            "exact",
            "fast_queries",
            "fast_violations",
        ):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.max_ratio = max(self.max_ratio, other.max_ratio)
        self.fast_max_ratio = max(self.fast_max_ratio, other.fast_max_ratio)
        self.failures.extend(other.failures[: max(0, 20 - len(self.failures))])


def sweep_instance(g: Graph, labels: LabelSet, f: int, k: int | None = None) -> SweepStats:
    """Decoder (and, with ``k``, compiled fast queries) against brute force for every F and pair."""
    stats = SweepStats()
    s = labels.params.stretch
    oracle = SensitivityOracle.store(g, labels, tz_build(g, k)) if k is not None else None
    fast_bound = 2 * s * k + 2 * k - 1 if k is not None else None
    for fs in failure_sets(g, f):
        dec = Decoder([labels.elabel(e) for e in fs])
        if oracle is not None:
            oracle.set_failures(fs)
        gf = g.without_edges(fs)
        for p in range(g.n):
            truth = sssp(gf, p)
            for q in range(g.n):
                est = dec.distance(labels.vlabels[p], labels.vlabels[q])
                true = truth[q]
                stats.queries += 1
                where = f"F={list(fs)} p={p} q={q} est={est} dist={true}"
                if (est == UNREACHABLE) != (true == INF):
                    stats.unreachable_mismatch += 1
                    stats.failures.append("reachability " + where)
                elif true != INF:
                    if not (est <= true <= est * s):
                        stats.literal_violations += 1
                    if est < true:
                        stats.lower_violations += 1
                        stats.failures.append("lower " + where)
                    if est > s * true:
                        stats.upper_violations += 1
                        stats.failures.append("upper " + where)
                    stats.exact += est == true
                    if true:
                        stats.max_ratio = max(stats.max_ratio, est / true)
                if oracle is not None:
                    fast = oracle.distance(p, q)
                    stats.fast_queries += 1
                    bad = (fast == UNREACHABLE) != (true == INF)
                    if true != INF and not bad:
                        bad = not (true <= fast <= fast_bound * true)
                        if true:
                            stats.fast_max_ratio = max(stats.fast_max_ratio, fast / true)
                    if bad:
                        stats.fast_violations += 1
                        stats.failures.append(f"fast k={k} F={list(fs)} p={p} q={q} est={fast} dist={true}")
    return stats


def pack_equivalence(g: Graph, labels: LabelSet, f: int, samples: int, rng: random.Random) -> tuple[int, int]:
    """(agreeing, total) over sampled queries of packed vs unpacked original-vertex distances."""
    sets = failure_sets(g, f)
    agree = 0
    for _ in range(samples):
        fs = rng.choice(sets)
        p, q = rng.randrange(g.n), rng.randrange(g.n)
        packed, unpacked = discovered_distances(labels.vlabels[p], labels.vlabels[q], [labels.elabel(e) for e in fs])
        agree += packed == unpacked
    return agree, samples


def potential_report(sc: ScaleStructures) -> dict:
    """Per-level union-of-cuts diagnostic; raises AssertionError if the potential ever increases."""
    hier = sc.hierarchy
    out = [
        union_cut_diagnostic(hier.graph, hier.levels[j], counter.history, hier.h, hier.s)
        for j, counter in enumerate(hier.counters)
    ]
    return {"scale": sc.index, "levels": out}


def size_monitor(labels: LabelSet) -> dict:
    """Measured label sizes next to the shape of their bounds.

    Vertex fingerprints scale with (d+1) * width, vertex labels with
    (d+1)^2 * width * alpha edge fingerprints, edge labels with a further
    factor of the scale count.
    """
    assert labels.scales is not None
    d = labels.params.d
    width = max((c.width for sc in labels.scales for c in sc.covers), default=0)
    alpha = max(
        (sel.alpha for sc in labels.scales for sel in sc.selections[1:] if sel is not None), default=Fraction(0)
    )
    sizes = label_sizes(labels)
    vfp_units = (d + 1) * width
    vlb_units = vfp_units + 2 * vfp_units * (d + 1) ** 2 * width * float(alpha)
    return {
        "width": width,
        "alpha": float(alpha),
        "vertex_fingerprint_units": vfp_units,
        "vertex_label_units": vlb_units,
        "edge_label_units": vlb_units * (d + 1) ** 2 * width * float(alpha) * (labels.i_max + 1),
        "vertex_label_bytes_max": sizes["vertex_max"],
        "edge_label_bytes_max": sizes["edge_max"],
    }


def instance_report(
    seed: int,
    profile: Profile,
    k: int | None = None,
    corrupt: bool = False,
    sweep: bool = True,
    pack: int = 0,
) -> tuple[dict, SweepStats]:
    g = generate_graph(seed, profile.n_max, profile.m_max, profile.max_length)
    return graph_report(g, seed, profile, k, corrupt, sweep, pack)


def graph_report(
    g: Graph,
    seed: int,
    profile: Profile,
    k: int | None = None,
    corrupt: bool = False,
    sweep: bool = True,
    pack: int = 0,
) -> tuple[dict, SweepStats]:
    """Label build, per-scale checks, light-component replay, diagnostics and (optionally) the exhaustive sweep."""
    t0 = time.perf_counter()
    labels = build_labels(g, profile.label_params())
    build_time = time.perf_counter() - t0
    assert labels.scales is not None
    if corrupt:
        labels = corrupt_labels(labels)
    hier = [check_hierarchy(sc) for sc in labels.scales]
    hit = [check_hitting(sc) for sc in labels.scales]
    bound = sum(sc.cover_mass() for sc in labels.scales)
    stats = sweep_instance(g, labels, profile.f, k) if sweep else SweepStats()
    rng = random.Random(seed)
    light_ok = True
    for _ in range(5):
        fs = rng.choice(failure_sets(g, profile.f))
        p, q = rng.randrange(g.n), rng.randrange(g.n)
        wp = {p, q} | {vl.vertex for e in fs for vl in labels.elabel(e).vlabels}
        light_ok &= check_light_components(g, labels, fs, wp)
    agree, total = pack_equivalence(g, labels, profile.f, pack, rng)
    potentials = [potential_report(sc) for sc in labels.scales]
    cut_ratio = [
        {"scale": p["scale"], "level": j, "sum_ratio": lv["sum_ratio_float"], "a_ln_n": lv["a_ln_n"]}
        for p in potentials
        for j, lv in enumerate(p["levels"])
    ]
    for row in cut_ratio:
        log.info("seed %d scale %d level %d: sum |C|/phi = %.3f, |A| ln n = %.3f", seed, *row.values())
    report = {
        "seed": seed,
        "n": g.n,
        "m": g.m,
        "build_seconds": round(build_time, 3),
        "hierarchy_passed": all(h["passed"] for h in hier),
        "hitting_passed": all(h["passed"] for h in hit),
        "light_components_passed": light_ok,
        "nontrivial_edge_labels": labels.nontrivial_count(),
        "nontrivial_bound": bound,
        "label_sizes": label_sizes(labels),
        "phi": [str(sc.hierarchy.phi) for sc in labels.scales],
        "nonzero_increments": [sc.hierarchy.nonzero_cuts() for sc in labels.scales],
        "hitting_replayed": sum(h["replayed"] for h in hit),
        "pack_agree": agree,
        "pack_total": total,
        "potential_monotone": all(lv["potential_monotone"] for p in potentials for lv in p["levels"]),
        "cut_ratio": cut_ratio,
        "size_monitor": size_monitor(labels),
    }
    return report, stats


def corrupt_labels(labels: LabelSet) -> LabelSet:
    """Fault injection: give one non-trivial edge label a conflicting copy of a stored vertex label."""
    for eid, e in labels.elabels.items():
        if e.vlabels and e.scales:
            victim = e.vlabels[0]
            part = victim.scales[0]
            bad_part = replace(part, tau_heavy=part.tau_heavy + 1)
            bad = replace(victim, scales=(bad_part, *victim.scales[1:]))
            elabels = dict(labels.elabels)
            elabels[eid] = replace(e, vlabels=(bad, *e.vlabels[1:]))
            return replace(labels, elabels=elabels)
    return labels


# ---------------------------------------------------------------- standalone suites


def _components(vertices: Iterable[int], pairs: Iterable[tuple[int, int]]) -> list[frozenset[int]]:
    root = {v: v for v in vertices}

    def find(x: int) -> int:
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for a, b in pairs:
        root[find(a)] = find(b)
    groups: dict[int, set[int]] = {}
    for v in root:
        groups.setdefault(find(v), set()).add(v)
    return [frozenset(c) for c in groups.values()]


def euler_instance(
    rng: random.Random, n_max: int
) -> tuple[list[int | None], NodeWeighting, Fraction, list[tuple[int, int]]]:
    """Random rooted tree (parent list), weighting, threshold and failed (child, parent) edges."""
    n = rng.randint(1, n_max)
    parents: list[int | None] = [None] + [rng.randrange(v) for v in range(1, n)]
    a = NodeWeighting({v: Fraction(rng.randint(0, 6), rng.choice((1, 2))) for v in range(n)})
    tau = Fraction(rng.randint(0, max(1, int(a.total()))))
    edges = [(v, parents[v]) for v in range(1, n)]
    failed = rng.sample(edges, min(len(edges), rng.randint(0, 4)))
    return parents, a, tau, failed


def _subtree_record(tour: EulerTour, a: NodeWeighting, v: int) -> TourRecord:
    lo, hi = tour.start[v], tour.end[v]
    return TourRecord(lo, hi, (a.mass(tour.sequence[lo : hi + 1]),))


def euler_suite(instances: int, n_max: int, seed: int) -> dict:
    """Coverage of light components by maximal intervals, and component recovery vs union-find."""
    rng = random.Random(seed)
    coverage_checked = coverage_failures = recovery_failures = 0
    for _ in range(instances):
        parents, a, tau, failed = euler_instance(rng, n_max)
        n = len(parents)
        children: dict[int, list[int]] = {}
        for v in range(1, n):
            children.setdefault(parents[v], []).append(v)
        tour = euler_tour(0, children)
        gone = set(failed)
        comps = _components(range(n), [e for e in ((v, parents[v]) for v in range(1, n)) if e not in gone])

        recovered = recover_components(
            n, (a.total(),), [(_subtree_record(tour, a, p), _subtree_record(tour, a, c)) for c, p in failed]
        )
        got = {
            frozenset(tour.sequence[t] for lo, hi in comp.intervals for t in range(lo, hi + 1)): comp.mass[0]
            for comp in recovered
        }
        recovery_failures += got != {c: a.mass(c) for c in comps}

        for comp in comps:
            if len(comp) == n or a.mass(comp) > tau:
                continue
            coverage_checked += 1
            covered: set[int] = set()
            for c, p in failed:
                for u, v in ((c, p), (p, c)):
                    if v in comp and u not in comp:
                        t = tour.pos[(u, v)]
                        covered |= tour.window(t, maximal_interval(tour, t, a, tau))
            coverage_failures += not comp <= covered
    return {
        "instances": instances,
        "coverage_checked": coverage_checked,
        "coverage_failures": coverage_failures,
        "recovery_failures": recovery_failures,
        "passed": coverage_failures == 0 and recovery_failures == 0,
    }


def tz_suite(graphs: int, n_max: int, ks: Sequence[int], seed: int, max_length: int = 8) -> dict:
    """All-pairs stretch of Thorup-Zwick estimates on seeded graphs, for every k."""
    checked = violations = 0
    worst = 1.0
    for idx in range(graphs):
        g = generate_graph(seed + idx, n_max, 2 * n_max, max_length)
        truth = [sssp(g, p) for p in range(g.n)]
        for k in ks:
            tz = tz_build(g, k)
            for p in range(g.n):
                for q in range(g.n):
                    est = tz_query(tz.labels[p], tz.labels[q])
                    true = truth[p][q]
                    checked += 1
                    if true == INF:
                        violations += est != UNREACHABLE
                    elif not (true <= est <= (2 * k - 1) * true):
                        violations += 1
                    elif true:
                        worst = max(worst, est / true)
    return {
        "graphs": graphs,
        "queries": checked,
        "violations": violations,
        "max_ratio": worst,
        "passed": violations == 0,
    }


def determinism_check(profile: Profile, seed: int) -> dict:
    """Two independent pipeline runs from one seed must agree byte for byte."""
    rng = random.Random(seed)
    g = generate_graph(seed, profile.n_max, profile.m_max, profile.max_length)
    failures = sorted(rng.sample(range(g.m), min(g.m, profile.f)))
    k = profile.ks[0] if profile.ks else 2
    first = pipeline_bytes(seed, profile, k, failures)
    second = pipeline_bytes(seed, profile, k, failures)
    return {
        "seed": seed,
        "store_bytes": len(first[0]),
        "compiled_bytes": len(first[1]),
        "passed": first == second,
    }


def _suite_job(
    job: tuple[int, int | None, Profile, bool, int],
) -> tuple[int, dict | None, SweepStats | None, str | None]:
    seed, k, profile, corrupt, pack = job
    try:
        report, stats = instance_report(seed, profile, k, corrupt=corrupt, pack=pack)
    except (FtdistError, AssertionError) as exc:
        return seed, None, None, f"{type(exc).__name__}: {exc}"
    return seed, report, stats, None


def validate_suite(
    profile: Profile = DEFAULT_PROFILE,
    seeds: Sequence[int] | None = None,
    corrupt: bool = False,
    workers: int = 1,
) -> dict:
    """Run every check on the profile's instances; machine-readable report with stable keys.

    Instance ``idx`` uses TZ parameter ``ks[idx % len(ks)]``; the pack/unpack
    samples are spread evenly over instances. ``workers > 1`` spreads
    instances over processes; results are merged in seed order.
    """
    seeds = list(range(profile.seed, profile.seed + profile.graphs)) if seeds is None else list(seeds)
    share, extra = divmod(profile.pack_samples, len(seeds)) if seeds else (0, 0)
    jobs = [
        (seed, profile.ks[idx % len(profile.ks)] if profile.ks else None, profile, corrupt, share + (idx < extra))
        for idx, seed in enumerate(seeds)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_suite_job, jobs))
    else:
        results = [_suite_job(job) for job in jobs]
    totals = SweepStats()
    instances = []
    errors = []
    for seed, report, stats, error in results:
        if error is not None:
            errors.append({"seed": seed, "error": error})
            continue
        instances.append(report)
        totals.merge(stats)
    suites = {
        "euler_tours": euler_suite(profile.euler_instances, profile.euler_n_max, profile.seed),
        "tz_stretch": tz_suite(profile.tz_graphs, profile.tz_n_max, profile.ks, profile.seed),
        "tail_dp": dp_suite(profile.dp_systems, profile.seed),
    }
    if profile.determinism and seeds:
        suites["determinism"] = determinism_check(profile, seeds[0])
    checks = {
        "no_errors": not errors,
        "reachability": totals.unreachable_mismatch == 0,
        "lower_bound": totals.lower_violations == 0,
        "upper_bound": totals.upper_violations == 0,
        "sandwich_literal": totals.literal_violations == 0,
        "fast_query": totals.fast_violations == 0,
        "hierarchy": all(r["hierarchy_passed"] for r in instances),
        "hitting_sets": all(r["hitting_passed"] for r in instances),
        "light_components": all(r["light_components_passed"] for r in instances),
        "nontrivial_bound": all(r["nontrivial_edge_labels"] <= r["nontrivial_bound"] for r in instances),
        "pack_unpack": all(r["pack_agree"] == r["pack_total"] for r in instances),
        "potential_monotone": all(r["potential_monotone"] for r in instances),
        **{name: suite["passed"] for name, suite in suites.items()},
    }
    return {
        "profile": asdict(profile),
        "instances": len(seeds),
        "queries": totals.queries,
        "exact_estimates": totals.exact,
        "max_ratio": totals.max_ratio,
        "fast_queries": totals.fast_queries,
        "fast_max_ratio": totals.fast_max_ratio,
        "pack_samples": sum(r["pack_total"] for r in instances),
        "diagnostics": diagnostics_summary(instances),
        "suites": suites,
        "checks": checks,
        "errors": errors,
        "sample_failures": totals.failures[:20],
        "passed": all(checks.values()),
    }


def diagnostics_summary(instances: Sequence[dict]) -> dict:
    """Logged monitors aggregated over instance reports; nothing here is asserted."""
    rows = [row for r in instances for row in r["cut_ratio"] if row["a_ln_n"] > 0]
    monitors = [r["size_monitor"] for r in instances]
    return {
        "cut_ratio_max": max((row["sum_ratio"] / row["a_ln_n"] for row in rows), default=0.0),
        "cut_levels_nonzero": sum(1 for row in rows if row["sum_ratio"] > 0),
        "vertex_label_bytes_max": max((m["vertex_label_bytes_max"] for m in monitors), default=0),
        "edge_label_bytes_max": max((m["edge_label_bytes_max"] for m in monitors), default=0),
        "vertex_label_units_max": max((m["vertex_label_units"] for m in monitors), default=0),
        "edge_label_units_max": max((m["edge_label_units"] for m in monitors), default=0),
        "nontrivial_edge_labels": sum(r["nontrivial_edge_labels"] for r in instances),
        "nontrivial_bound": sum(r["nontrivial_bound"] for r in instances),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_json_default)


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def pipeline_bytes(seed: int, profile: Profile, k: int, failures: Sequence[int]) -> tuple[bytes, bytes]:
    """(label store, compiled oracle) bytes for one seeded run."""
    g = generate_graph(seed, profile.n_max, profile.m_max, profile.max_length)
    labels = build_labels(g, profile.label_params())
    oracle = SensitivityOracle.store(g, labels, tz_build(g, k))
    compiled = oracle.set_failures([e for e in failures if e < g.m])
    return dumps(labels), compiled.to_bytes()
