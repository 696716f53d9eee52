"""Nested length-constrained expander hierarchies.

Level ``j`` holds a node weighting ``A_j`` and, for ``j >= 1``, a moving
cut ``C_j`` on the ``1/(h s)`` grid. ``A_{j-1}`` is certified expanding in
``G - C_j`` and ``A_d`` in ``G`` itself.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .covers import DEFAULT_C_OMEGA
from .errors import ConstructionError, GraphError
from .flow import DEFAULT_PATH_CAP, CutCounter, cut_or_certify, cut_until_certify, slack_split
from .graph import Graph, MovingCut, NodeWeighting, apply_cut

log = logging.getLogger(__name__)

MAX_PHI_HALVINGS = 40


@dataclass
class Hierarchy:
    graph: Graph
    h: int
    s: int
    d: int
    phi: Fraction
    mode: str = "poly"
    c_omega: float = DEFAULT_C_OMEGA
    path_cap: int = DEFAULT_PATH_CAP
    a: NodeWeighting = field(default_factory=NodeWeighting)
    levels: list[NodeWeighting] = field(default_factory=list)  # A_0 .. A_d
    cuts: list[MovingCut] = field(default_factory=list)  # C_1 .. C_d
    counters: list[CutCounter] = field(default_factory=list)  # one per cut level
    attempts: int = 1

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("hierarchy depth d must be at least 1")
        if not self.levels:
            self.levels = [NodeWeighting() for _ in range(self.d + 1)]
        if not self.cuts:
            self.cuts = [MovingCut(self.grid) for _ in range(self.d)]
        if not self.counters:
            self.counters = [CutCounter() for _ in range(self.d)]

    @property
    def grid(self) -> int:
        return self.h * self.s

    def cut(self, i: int) -> MovingCut:
        """C_i for i in 1..d; C_{d+1} is the zero cut."""
        return self.cuts[i - 1] if i <= self.d else MovingCut(self.grid)

    def derived_graph(self, j: int) -> Graph:
        """G_j: lengths l + h s (C_{j+1} + ... + C_d)."""
        g = self.graph
        for i in range(self.d, j, -1):
            g = apply_cut(g, self.cut(i), self.grid)
        return g

    def gamma(self) -> Fraction:
        """Worst per-level shrink: max of |A_{j+1}|/|A_j| and 2|deg C_{j+1}|/|A_j|."""
        worst = Fraction(0)
        for j in range(self.d):
            base = self.levels[j].total()
            if base == 0:
                continue
            deg = self.cut(j + 1).degree(self.graph).total()
            worst = max(worst, self.levels[j + 1].total() / base, 2 * deg / base)
        return worst

    def nonzero_cuts(self) -> list[int]:
        return [c.nonzero for c in self.counters]

    def to_json(self) -> str:
        return json.dumps(hierarchy_dump(self), sort_keys=True, indent=2)


def _frac_map(m) -> dict[str, str]:
    return {str(k): str(v) for k, v in m.items()}


def hierarchy_dump(hier: Hierarchy) -> dict:
    return {
        "h": hier.h,
        "s": hier.s,
        "d": hier.d,
        "phi": str(hier.phi),
        "gamma": str(hier.gamma()),
        "attempts": hier.attempts,
        "levels": [{"index": j, "mass": str(a.total()), "weights": _frac_map(a)} for j, a in enumerate(hier.levels)],
        "cuts": [
            {
                "index": i + 1,
                "size": str(c.size(hier.graph)),
                "values": _frac_map(c),
                "nonzero_increments": hier.counters[i].nonzero,
            }
            for i, c in enumerate(hier.cuts)
        ],
    }


def hierarchy_update(state: Hierarchy, a_new: NodeWeighting) -> Hierarchy:
    """Raise the input weighting to ``a_new`` and restore every level's certificate."""
    if not state.a <= a_new:
        raise GraphError("hierarchy updates must be incremental (a_new must dominate A)")
    g = state.graph

    def rec_update(delta: NodeWeighting, j: int) -> NodeWeighting:
        if j < state.d:
            while True:
                step = cut_until_certify(
                    g,
                    state.levels[j] + delta,
                    state.h,
                    state.s,
                    state.phi,
                    state.mode,
                    base=state.cuts[j],
                    counter=state.counters[j],
                    c_omega=state.c_omega,
                    path_cap=state.path_cap,
                )
                if step.is_zero():
                    break
                state.cuts[j] = state.cuts[j] + step
                delta = delta + rec_update(step.degree(g), j + 1)
        state.levels[j] = state.levels[j] + delta
        return delta

    delta = a_new - state.a
    state.a = a_new
    rec_update(delta, 0)
    return state


def default_phi(total: Fraction, d: int) -> Fraction:
    """1/2 * |A|^(-1/d), snapped to a rational."""
    if total <= 1:
        return Fraction(1, 2)
    return Fraction(0.5 * float(total) ** (-1.0 / d)).limit_denominator(1 << 20)


def top_certificate(hier: Hierarchy):
    """Certificate that A_d expands in G itself."""
    return cut_or_certify(
        hier.graph,
        hier.levels[hier.d],
        hier.h,
        hier.s,
        slack_split(hier.s, hier.mode),
        hier.phi,
        hier.c_omega,
        hier.path_cap,
    )


def build_hierarchy(
    g: Graph,
    a: NodeWeighting,
    h: int,
    s_ed: int,
    d: int,
    phi: Fraction | None = None,
    mode: str = "poly",
    c_omega: float = DEFAULT_C_OMEGA,
    path_cap: int = DEFAULT_PATH_CAP,
) -> Hierarchy:
    """One-shot hierarchy for ``a``.

    With ``phi`` unset, start from 1/2 |A|^(-1/d) and halve until the
    measured shrink is at most 1/2 and A_d certifies in G. An explicit
    ``phi`` gets one attempt and fails loudly otherwise.
    """
    if s_ed < 100:
        raise ValueError("length slack s_ed must be at least 100")
    fixed = phi is not None
    phi = Fraction(phi) if fixed else default_phi(a.total(), d)
    for attempt in range(1, MAX_PHI_HALVINGS + 1):
        hier = Hierarchy(g, h, s_ed, d, phi, mode, c_omega, path_cap, attempts=attempt)
        hierarchy_update(hier, a)
        gamma = hier.gamma()
        top_ok = hier.levels[d].total() <= 1 or top_certificate(hier).certified
        if gamma <= Fraction(1, 2) and top_ok:
            return hier
        if fixed:
            raise ConstructionError(f"phi={phi} gives shrink {gamma} (> 1/2) or uncertified top level")
        log.debug("phi=%s rejected (gamma=%s, top certified=%s); halving", phi, gamma, top_ok)
        phi /= 2
    raise ConstructionError("no phi found with shrink at most 1/2")


def validate_hierarchy(hier: Hierarchy, g: Graph | None = None) -> dict:
    """Exact nesting and bookkeeping checks plus fresh per-level certificates."""
    g = g if g is not None else hier.graph
    d = hier.d
    a = hier.levels
    report_levels = []
    ok = True
    for i in range(1, d + 2):
        entry: dict = {"level": i}
        if i <= d:
            deg = hier.cut(i).degree(g)
            entry["nested"] = deg <= a[i] and a[i] <= a[i - 1]
        else:
            entry["nested"] = True
        host = apply_cut(g, hier.cut(i), hier.grid)
        weighting = a[i - 1] if i <= d else a[d]
        if i > d and weighting.total() <= 1:
            entry.update(certified=True, congestion="0", budget="vacuous")
        else:
            cert = cut_or_certify(
                host, weighting, hier.h, hier.s, slack_split(hier.s, hier.mode), hier.phi, hier.c_omega, hier.path_cap
            )
            entry.update(certified=cert.certified, congestion=str(cert.congestion), budget=str(cert.congestion_budget))
        ok &= entry["nested"] and entry["certified"]
        report_levels.append(entry)

    bookkeeping = a[0] == a[1] + hier.a
    for j in range(1, d):
        bookkeeping &= a[j] == a[j + 1] + hier.cut(j).degree(g)
    bookkeeping &= a[d] == hier.cut(d).degree(g)
    gamma = hier.gamma()
    a0_bound = gamma < 1 and a[0].total() * (1 - gamma) <= hier.a.total()
    pair_cap = g.n * (g.n - 1) // 2
    counts = hier.nonzero_cuts()
    counter_ok = all(c <= pair_cap for c in counts)
    degree_ok = all(
        2 * hier.cut(j + 1).degree(g).total() <= gamma * a[j].total() or a[j].total() == 0 for j in range(d)
    )
    ok &= bookkeeping and (hier.a <= a[0]) and a0_bound and counter_ok and degree_ok and gamma <= Fraction(1, 2)
    return {
        "levels": report_levels,
        "bookkeeping": bookkeeping,
        "a0_dominates": hier.a <= a[0],
        "a0_bound": a0_bound,
        "gamma": str(gamma),
        "gamma_pow_d_mass": float(gamma) ** d * float(a[0].total()),
        "phi": str(hier.phi),
        "nonzero_increments": counts,
        "pair_cap": pair_cap,
        "counter_ok": counter_ok,
        "degree_shrink_ok": degree_ok,
        "passed": bool(ok),
    }
