"""Deterministic hitting sets by the method of conditional expectations.

Sampling each element with probability ``rho_e = min(1, w(e) beta)`` hits
every heavy set P and keeps every light set Q below ``alpha`` with
probability at least 1/2. Fixing elements one at a time so that the
expected number of violated constraints never increases yields a
deterministic selection meeting every constraint.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConstructionError
from .graph import Graph, MovingCut, NodeWeighting
from .trees import ClusterTree, maximal_interval

BETA_PRECISION = 1 << 32


@dataclass(frozen=True)
class ConstraintSystem:
    elements: tuple[int, ...]
    weight: dict[int, Fraction]
    p_sets: tuple[frozenset[int], ...]
    q_sets: tuple[frozenset[int], ...]
    tau_low: Fraction
    tau_high: Fraction

    def __post_init__(self) -> None:
        if not (0 < self.tau_low <= 1):
            raise ValueError("tau_low must lie in (0, 1]")
        if self.tau_high < 1:
            raise ValueError("tau_high must be at least 1")
        universe = set(self.elements)
        for e, w in self.weight.items():
            if not (0 <= w <= 1):
                raise ValueError(f"weight of {e} outside [0, 1]")
        for p in self.p_sets:
            if not p <= universe or self.mass(p) < self.tau_low:
                raise ValueError(f"P-set {sorted(p)} is not a heavy subset of the elements")
        for q in self.q_sets:
            if not q <= universe or self.mass(q) > self.tau_high:
                raise ValueError(f"Q-set {sorted(q)} is not a light subset of the elements")

    @property
    def m(self) -> int:
        return len(self.p_sets) + len(self.q_sets)

    def mass(self, items: Iterable[int]) -> Fraction:
        return sum((self.weight.get(e, Fraction(0)) for e in items), Fraction(0))

    def beta(self) -> Fraction:
        """100 ln(m) / tau_low, rounded up on a 2^-32 grid; m is floored at 2."""
        scaled = math.ceil(100 * math.log(max(self.m, 2)) * BETA_PRECISION) + 1
        return Fraction(scaled, BETA_PRECISION) / self.tau_low

    def alpha(self) -> Fraction:
        return 2 * self.beta() * self.tau_high

    def rho(self, e: int, beta: Fraction | None = None) -> Fraction:
        beta = self.beta() if beta is None else beta
        return min(Fraction(1), self.weight.get(e, Fraction(0)) * beta)


@dataclass(frozen=True)
class Selection:
    selected: frozenset[int]
    alpha: Fraction
    beta: Fraction
    trace: tuple[Fraction, ...] = field(repr=False)


def tail_probability(rhos: Sequence[Fraction], need: int) -> Fraction:
    """Pr[at least ``need`` of independent Bernoulli(rho) trials succeed].

    Counts above ``need - 1`` collapse into one absorbing state.
    """
    if need <= 0:
        return Fraction(1)
    if need > len(rhos):
        return Fraction(0)
    f = [Fraction(1)] + [Fraction(0)] * need
    for r in rhos:
        nxt = [Fraction(0)] * (need + 1)
        for c, x in enumerate(f):
            if not x:
                continue
            if c == need:
                nxt[c] += x
                continue
            nxt[c + 1] += x * r
            nxt[c] += x * (1 - r)
        f = nxt
    return f[need]


def p_violation(p: frozenset[int], fixed: dict[int, int], rho: dict[int, Fraction]) -> Fraction:
    """Probability that no element of ``p`` ends up selected."""
    prob = Fraction(1)
    for e in p:
        x = fixed.get(e)
        if x == 1:
            return Fraction(0)
        if x is None:
            prob *= 1 - rho[e]
    return prob


def q_violation(q: frozenset[int], fixed: dict[int, int], rho: dict[int, Fraction], alpha: Fraction) -> Fraction:
    """Probability that more than ``alpha`` elements of ``q`` end up selected."""
    chosen = sum(1 for e in q if fixed.get(e) == 1)
    open_rhos = [rho[e] for e in sorted(q) if e not in fixed]
    return tail_probability(open_rhos, math.floor(alpha) + 1 - chosen)


def derandomized_select(cs: ConstraintSystem) -> Selection:
    """Fix elements in ascending order, never increasing the expected violation count."""
    if cs.m == 0:
        return Selection(frozenset(), Fraction(0), Fraction(0), (Fraction(0),))
    beta = cs.beta()
    alpha = 2 * beta * cs.tau_high
    rho = {e: cs.rho(e, beta) for e in cs.elements}
    constraints: list[tuple[str, frozenset[int]]] = [("P", p) for p in cs.p_sets] + [("Q", q) for q in cs.q_sets]
    member: dict[int, list[int]] = {e: [] for e in cs.elements}
    for i, (_, s) in enumerate(constraints):
        for e in s:
            member[e].append(i)

    def prob(i: int, fixed: dict[int, int]) -> Fraction:
        kind, s = constraints[i]
        return p_violation(s, fixed, rho) if kind == "P" else q_violation(s, fixed, rho, alpha)

    fixed: dict[int, int] = {}
    current = [prob(i, fixed) for i in range(len(constraints))]
    total = sum(current, Fraction(0))
    if total > Fraction(1, 2):
        raise ConstructionError(f"initial expected violations {float(total):.4f} exceed 1/2")
    trace = [total]
    for e in sorted(cs.elements):
        r = rho[e]
        affected = member[e]
        options = [0, 1] if 0 < r < 1 else [int(r)]
        if r == 0 or not affected:
            fixed[e] = options[0]
            trace.append(total)
            continue
        best = None
        for x in options:
            trial = dict(fixed)
            trial[e] = x
            new = [prob(i, trial) for i in affected]
            value = total - sum((current[i] for i in affected), Fraction(0)) + sum(new, Fraction(0))
            if best is None or value < best[0]:
                best = (value, x, new)
        value, x, new = best
        fixed[e] = x
        for i, pr in zip(affected, new):
            current[i] = pr
        if value > total:
            raise ConstructionError("conditional expectation increased")
        total = value
        trace.append(total)

    selected = frozenset(e for e, x in fixed.items() if x == 1)
    for kind, s in constraints:
        hits = len(s & selected)
        if (kind == "P" and hits == 0) or (kind == "Q" and hits > alpha):
            raise ConstructionError(f"{kind}-constraint {sorted(s)} violated after derandomization")
    return Selection(selected, alpha, beta, tuple(trace))


def incident_edges(g: Graph, vertices: Iterable[int]) -> frozenset[int]:
    vs = set(vertices)
    return frozenset(e.id for e in g.edges if e.u in vs or e.v in vs)


def build_constraints(
    g: Graph,
    cut: MovingCut,
    a_level: NodeWeighting,
    trees: Sequence[ClusterTree],
    paths: Sequence[tuple[int, ...]],
    tau_hit: Fraction,
    tau_heavy: Fraction,
) -> ConstraintSystem:
    """Constraint system whose hitting sets are valid sampled edge sets for one level.

    P: single edges and lex-max shortest paths carrying cut mass at least
    ``tau_hit``. Q: edges incident to light clusters and to every maximal
    light tour window of every cluster tree.
    """
    weight = {e.id: cut(e.id) for e in g.edges}
    p_sets: dict[frozenset[int], None] = {}
    for e in g.edges:
        if weight[e.id] >= tau_hit:
            p_sets[frozenset((e.id,))] = None
    for path in paths:
        if path and sum((weight[eid] for eid in path), Fraction(0)) >= tau_hit:
            p_sets[frozenset(path)] = None

    q_sets: dict[frozenset[int], None] = {}
    for tree in trees:
        if a_level.mass(tree.cluster) <= tau_heavy:
            q = incident_edges(g, tree.cluster)
            if q:
                q_sets[q] = None
        tour = tree.tour
        for _, t in sorted(tour.pos.items()):
            t_end = maximal_interval(tour, t, a_level, tau_heavy)
            q = incident_edges(g, tour.window(t, t_end))
            if q:
                q_sets[q] = None

    return ConstraintSystem(
        tuple(e.id for e in g.edges),
        weight,
        tuple(sorted(p_sets, key=sorted)),
        tuple(sorted(q_sets, key=sorted)),
        tau_hit,
        max(Fraction(1), tau_heavy),
    )
