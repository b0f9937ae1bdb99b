"""Optimal type orderings by feedback arc set on the critical-pair digraph.

Pairs of types whose opposing weights differ are *critical*; the heavier
direction becomes an edge.  Strongly connected components of that digraph are
ordered topologically, each component is solved exactly by subset dynamic
programming (or, above a size threshold, ordered by Borda score), and the
solved components are concatenated.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

from .noise import NoiseMatrix
from .theory import ObjectiveSpec, WeightMatrix, cached_weight_matrix, predicted_performance
from .typespace import RankType, TypeOrdering, borda_score, enumerate_types

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 22

# Table-style bins for component sizes.
SIZE_BINS = (("1", 1, 1), ("3-7", 3, 7), ("8-11", 8, 11), (">=12", 12, None))


@dataclass
class CriticalDigraph:
    """Nodes are canonical type indices; edge (a, b) means W(a, b) > W(b, a)."""

    k: int
    graph: nx.DiGraph

    @property
    def types(self) -> tuple[RankType, ...]:
        return enumerate_types(self.k)

    def edges(self) -> set[tuple[RankType, RankType]]:
        t = self.types
        return {(t[a], t[b]) for a, b in self.graph.edges}


@dataclass
class ComponentPlan:
    k: int
    components: list[list[int]]
    methods: list[str] = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.components]

    def histogram(self) -> dict[str, int]:
        """Counts per size bin (1, 3-7, 8-11, >=12) plus the maximum size."""
        sizes = self.sizes
        hist = {}
        for label, lo, hi in SIZE_BINS:
            hist[label] = sum(1 for s in sizes if s >= lo and (hi is None or s <= hi))
        hist["max"] = max(sizes)
        return hist

    def size_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(self.sizes).items()))

    def to_json(self) -> dict:
        t = enumerate_types(self.k)
        return {
            "components": [[list(t[i]) for i in c] for c in self.components],
            "methods": self.methods,
            "histogram": self.histogram(),
            "size_counts": {str(s): n for s, n in self.size_counts().items()},
        }


def _borda_key(k: int):
    types = enumerate_types(k)
    return lambda i: (-borda_score(types[i]), types[i])


def build_critical_digraph(weights: WeightMatrix) -> CriticalDigraph:
    w = weights.numerators
    n = w.shape[0]
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for a in range(n):
        for b in range(a + 1, n):
            if w[a, b] > w[b, a]:
                g.add_edge(a, b)
            elif w[b, a] > w[a, b]:
                g.add_edge(b, a)
    return CriticalDigraph(weights.k, g)


def condense(graph: CriticalDigraph) -> ComponentPlan:
    """SCCs in a topological order of the condensation.

    Among components that are free to go next, the one holding the highest
    Borda score goes first, then the one with the lexicographically least type.
    """
    key = _borda_key(graph.k)
    types = enumerate_types(graph.k)
    cond = nx.condensation(graph.graph)
    members = {c: sorted(cond.nodes[c]["members"], key=key) for c in cond.nodes}
    order = nx.lexicographical_topological_sort(
        cond, key=lambda c: (-borda_score(types[members[c][0]]), min(types[i] for i in members[c]))
    )
    comps = [members[c] for c in order]
    plan = ComponentPlan(graph.k, comps)
    _assert_consistent(graph, plan)
    return plan


def _assert_consistent(graph: CriticalDigraph, plan: ComponentPlan) -> None:
    where = {v: i for i, comp in enumerate(plan.components) for v in comp}
    for a, b in graph.graph.edges:
        if where[a] > where[b]:
            raise AssertionError("condensation order violates a critical edge")


def _pair_gains(weights: WeightMatrix, comp: Sequence[int]) -> list[list[int]]:
    """gain[u][v]: extra weight of placing u before v, relative to the worse direction."""
    w = weights.numerators
    m = len(comp)
    gain = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            a, b = int(w[comp[i], comp[j]]), int(w[comp[j], comp[i]])
            low = min(a, b)
            gain[i][j], gain[j][i] = a - low, b - low
    return gain


def arrangement_value(weights: WeightMatrix, order: Sequence[int]) -> Fraction:
    """Sum of W(u, v) over pairs with u placed before v."""
    w = weights.numerators
    total = sum(int(w[order[i], order[j]]) for i in range(len(order)) for j in range(i + 1, len(order)))
    return Fraction(total, weights.denominator)


def best_arrangement_dp(gain: list[list[int]]) -> list[int]:
    """Maximum-weight linear arrangement of 0..m-1 by DP over subsets.

    ``best[S]`` is the best value of an ordering of ``S`` placed as a prefix; the
    cost of appending ``v`` after ``S`` is read from two half-mask tables so
    each transition is O(1).  Ties keep the lowest-index last element.
    """
    m = len(gain)
    if m <= 1:
        return list(range(m))
    h = m // 2
    lo_mask = (1 << h) - 1
    # into_lo[v][T] = sum of gain[u][v] for u in T (T over the low h bits), same for high bits
    into_lo, into_hi = [], []
    for v in range(m):
        lo = [0] * (1 << h)
        for t in range(1, 1 << h):
            low = (t & -t).bit_length() - 1
            lo[t] = lo[t & (t - 1)] + gain[low][v]
        hi = [0] * (1 << (m - h))
        for t in range(1, 1 << (m - h)):
            low = (t & -t).bit_length() - 1
            hi[t] = hi[t & (t - 1)] + gain[h + low][v]
        into_lo.append(lo)
        into_hi.append(hi)

    full = (1 << m) - 1
    best = [0] * (full + 1)
    last = bytearray(full + 1)
    for s in range(1, full + 1):
        x = s
        top = None
        arg = 0
        while x:
            bit = x & -x
            v = bit.bit_length() - 1
            t = s ^ bit
            val = best[t] + into_lo[v][t & lo_mask] + into_hi[v][t >> h]
            if top is None or val > top:
                top, arg = val, v
            x ^= bit
        best[s] = top
        last[s] = arg

    order = []
    s = full
    while s:
        v = last[s]
        order.append(v)
        s ^= 1 << v
    return order[::-1]


def best_arrangement_bruteforce(gain: list[list[int]]) -> tuple[int, list[int]]:
    """Exhaustive search over all orderings; a test oracle for small components."""
    m = len(gain)
    best_val, best_order = None, None
    for perm in itertools.permutations(range(m)):
        val = sum(gain[perm[i]][perm[j]] for i in range(m) for j in range(i + 1, m))
        if best_val is None or val > best_val:
            best_val, best_order = val, list(perm)
    return best_val, best_order


def solve_component(
    component: Sequence[int], weights: WeightMatrix, threshold: int = DEFAULT_THRESHOLD
) -> tuple[list[int], bool]:
    """Order one component's types; returns (ordered type indices, exact?)."""
    comp = sorted(component, key=_borda_key(weights.k))
    if not comp:
        raise ValueError("empty component")
    if len(comp) > threshold:
        log.warning(
            "component of %d types exceeds the exact-solve threshold %d; ordering it by Borda score",
            len(comp), threshold,
        )
        return comp, False
    order = best_arrangement_dp(_pair_gains(weights, comp))
    return [comp[i] for i in order], True


@dataclass
class OptimizationResult:
    ordering: TypeOrdering
    performance: Fraction
    plan: ComponentPlan
    weights: WeightMatrix

    @property
    def all_exact(self) -> bool:
        return all(self.ordering.exact)

    def to_json(self, precision: int = 4) -> dict:
        out = self.ordering.to_json()
        out["objective"] = self.weights.objective.to_json()
        out["noise_label"] = self.weights.noise_label
        out["predicted"] = f"{self.performance.numerator}/{self.performance.denominator}"
        out["predicted_percent"] = round(100 * float(self.performance), precision)
        out["plan"] = self.plan.to_json()
        return out


def optimize_weights(weights: WeightMatrix, threshold: int = DEFAULT_THRESHOLD) -> OptimizationResult:
    graph = build_critical_digraph(weights)
    plan = condense(graph)
    types = enumerate_types(weights.k)
    ordered, exact = [], []
    for comp in plan.components:
        order, is_exact = solve_component(comp, weights, threshold)
        plan.methods.append("exact-dp" if is_exact else "borda-fallback")
        ordered.extend(types[i] for i in order)
        exact.extend([is_exact] * len(order))
    ordering = TypeOrdering(tuple(ordered), provenance="optimized", exact=tuple(exact))
    return OptimizationResult(ordering, predicted_performance(ordering, weights), plan, weights)


def optimize(
    k: int,
    matrix: NoiseMatrix,
    spec: ObjectiveSpec,
    threshold: int = DEFAULT_THRESHOLD,
    cache_dir=None,
) -> OptimizationResult:
    """Optimal type ordering for (k, noise matrix, objective) with its predicted performance."""
    return optimize_weights(cached_weight_matrix(k, matrix, spec, cache_dir), threshold)


def critical_pairs_consistent(weights: WeightMatrix, plan: ComponentPlan) -> bool:
    """W(a, b) >= W(b, a) whenever a's component precedes b's."""
    w = weights.numerators
    where = np.empty(w.shape[0], dtype=np.int64)
    for i, comp in enumerate(plan.components):
        where[comp] = i
    earlier = where[:, None] < where[None, :]
    diff = (w - w.T)[earlier]
    return bool(all(x >= 0 for x in diff))
