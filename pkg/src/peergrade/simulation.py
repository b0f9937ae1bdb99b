"""Finite-population exam simulation.

Each student grades a bundle of k papers, every paper is graded by k students.
A paper's type is the sorted vector of the positions it received, and the
final ranking orders papers by a type rule with random tie-breaks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graders import GraderModel
from .metrics import recovered_fractions
from .theory import ObjectiveSpec, rule_levels
from .typespace import TypeOrdering, type_indices

MAX_REGENERATIONS = 10

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def run_seed(seed: int, run: int) -> int:
    """Seed of run ``run`` in a batch seeded with ``seed``."""
    return splitmix64((splitmix64(seed & _MASK64) + run) & _MASK64)


@dataclass(frozen=True)
class ExamConfig:
    n: int
    k: int
    grader_model: GraderModel = field(default_factory=GraderModel.mallows)
    seed: int = 0
    runs: int = 1

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ValueError(f"need n > k >= 1, got n={self.n}, k={self.k}")
        if self.runs < 1:
            raise ValueError("runs must be positive")


@dataclass
class BundleGraph:
    """``bundles[g]`` are the k papers grader g ranks; ``graders[p]`` the k students grading p."""

    bundles: np.ndarray
    graders: np.ndarray

    @property
    def n(self) -> int:
        return self.bundles.shape[0]

    @property
    def k(self) -> int:
        return self.bundles.shape[1]

    def check(self) -> None:
        n, k = self.bundles.shape
        if (self.bundles == np.arange(n)[:, None]).any():
            raise AssertionError("a student grades their own paper")
        if (np.diff(np.sort(self.bundles, axis=1), axis=1) == 0).any():
            raise AssertionError("a bundle repeats a paper")
        if (np.bincount(self.bundles.ravel(), minlength=n) != k).any():
            raise AssertionError("a paper is not graded exactly k times")


class BundleGraphError(RuntimeError):
    pass


def _repair_round(pi: np.ndarray, used: np.ndarray, rng: np.random.Generator, limit: int) -> bool:
    """Fix forbidden assignments of ``pi`` in place by random transpositions.

    A swap is kept only when both graders end up with an allowed paper, so the
    number of bad graders never grows.
    """
    n = pi.size

    def allowed(g, p):
        return p != g and not (used[g] == p).any()

    bad = [g for g in range(n) if not allowed(g, pi[g])]
    swaps = 0
    while bad:
        g = bad[-1]
        h = int(rng.integers(n))
        swaps += 1
        if swaps > limit:
            return False
        if h != g and allowed(g, pi[h]) and allowed(h, pi[g]):
            pi[g], pi[h] = pi[h], pi[g]
            bad.pop()
            if h in bad:
                bad.remove(h)
    return True


def generate_bundle_graph(n: int, k: int, rng: np.random.Generator) -> BundleGraph:
    """Union of k random perfect matchings avoiding self-grading and repeats.

    Each round starts from a uniform permutation and repairs forbidden edges
    with random swaps, which only approximates a uniform matching.
    """
    if n < k + 2:
        raise ValueError(f"bundle graphs need n >= k + 2, got n={n}, k={k}")
    bundles = np.full((n, k), -1, dtype=np.int64)
    for r in range(k):
        for _ in range(MAX_REGENERATIONS):
            pi = rng.permutation(n)
            if _repair_round(pi, bundles[:, :r], rng, n * n):
                break
        else:
            raise BundleGraphError(f"round {r + 1} failed to repair after {MAX_REGENERATIONS} attempts")
        bundles[:, r] = pi
    graders = np.argsort(bundles.ravel(), kind="stable").reshape(n, k) // k
    return BundleGraph(bundles, graders)


@dataclass
class ExamRun:
    qualities: np.ndarray
    ground_truth: np.ndarray
    graph: BundleGraph
    positions: np.ndarray      # positions[g, j]: 0-based place given to g's j-th best paper
    types: np.ndarray          # canonical type index per paper
    final_rankings: dict[str, np.ndarray]
    seed: int | None = None

    @property
    def final_ranking(self) -> np.ndarray:
        return next(iter(self.final_rankings.values()))

    def grades(self) -> np.ndarray:
        """Per grader, the bundle papers in the order the grader ranked them."""
        sorted_bundles = _bundles_by_truth(self.graph, self.qualities)
        out = np.empty_like(sorted_bundles)
        np.put_along_axis(out, self.positions, sorted_bundles, axis=1)
        return out

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "qualities": self.qualities.tolist(),
            "ground_truth": self.ground_truth.tolist(),
            "grades": self.grades().tolist(),
            "final_rankings": {k: v.tolist() for k, v in self.final_rankings.items()},
        }


def _bundles_by_truth(graph: BundleGraph, qualities: np.ndarray) -> np.ndarray:
    """Each bundle sorted from the best to the worst paper."""
    order = np.argsort(-qualities[graph.bundles], axis=1, kind="stable")
    return np.take_along_axis(graph.bundles, order, axis=1)


def _draw_qualities(model: GraderModel, n: int, rng: np.random.Generator):
    for _ in range(100):
        q, bubbles = model.grader_qualities(n, rng)
        if np.unique(q).size == n:
            return q, bubbles
    raise RuntimeError("could not draw distinct qualities")


def rank_papers(levels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Papers sorted by level (lower first), equal levels in uniformly random order."""
    return np.lexsort((rng.random(levels.size), levels))


def simulate_exam(config: ExamConfig, rules, rng: np.random.Generator, check: bool = False) -> ExamRun:
    """One simulated exam.  ``rules`` is a rule, or a mapping label -> rule.

    A rule is a :class:`TypeOrdering` or ``"borda"``.  All rules see the same
    grades; each gets its own tie-break draw.
    """
    if not isinstance(rules, Mapping):
        label = "borda" if rules == "borda" else rules.provenance
        rules = {label: rules}
    for r in rules.values():
        if isinstance(r, TypeOrdering) and r.k != config.k:
            raise ValueError(f"ordering is for k={r.k}, exam has k={config.k}")
    n, k = config.n, config.k
    model = config.grader_model
    qualities, bubbles = _draw_qualities(model, n, rng)
    truth = np.argsort(-qualities, kind="stable")
    graph = generate_bundle_graph(n, k, rng)
    if check:
        graph.check()
    positions = model.positions(k, qualities, rng, bubbles)
    papers = _bundles_by_truth(graph, qualities)
    # each paper collects k positions, one per grader
    flat_p, flat_pos = papers.ravel(), positions.ravel() + 1
    order = np.argsort(flat_p, kind="stable")
    received = flat_pos[order].reshape(n, k)
    types = type_indices(received)
    finals = {label: rank_papers(rule_levels(rule, k)[types], rng) for label, rule in rules.items()}
    return ExamRun(qualities, truth, graph, positions, types, finals)


@dataclass
class BatchResult:
    rules: list[str]
    objectives: list[str]
    values: np.ndarray         # (runs, rules, objectives)
    seeds: list[int]

    def mean(self, rule: str, objective: str) -> float:
        return float(self.values[:, self.rules.index(rule), self.objectives.index(objective)].mean())

    def std(self, rule: str, objective: str) -> float:
        col = self.values[:, self.rules.index(rule), self.objectives.index(objective)]
        return float(col.std(ddof=1)) if col.size > 1 else 0.0

    def summary(self) -> list[dict]:
        return [
            {"rule": r, "objective": o, "mean": self.mean(r, o), "std": self.std(r, o), "runs": len(self.seeds)}
            for r in self.rules for o in self.objectives
        ]

    def csv_rows(self):
        yield ("run_id", "ordering_label", "metric", "value")
        for i in range(len(self.seeds)):
            for a, r in enumerate(self.rules):
                for b, o in enumerate(self.objectives):
                    yield (i, r, o, repr(float(self.values[i, a, b])))

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())


def _one_run(args):
    config, rules, specs, i, dump = args
    seed = run_seed(config.seed, i)
    run = simulate_exam(config, rules, np.random.default_rng(seed))
    run.seed = seed
    vals = [[float(v) for v in recovered_fractions(run.final_rankings[r], run.ground_truth, specs)] for r in rules]
    return vals, (json.dumps(run.to_json()) if dump else None)


def run_batch(
    config: ExamConfig,
    rules: Mapping[str, object],
    metrics: Sequence[ObjectiveSpec],
    threads: int = 1,
    dump_path=None,
) -> BatchResult:
    """``config.runs`` independent exams scored for every (rule, objective) pair.

    Run i is seeded from ``config.seed`` and i alone, so results do not depend
    on ``threads``.
    """
    rules = dict(rules)
    jobs = [(config, rules, list(metrics), i, dump_path is not None) for i in range(config.runs)]
    if threads > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one_run, jobs, chunksize=max(1, math.ceil(config.runs / (4 * threads)))))
    else:
        results = [_one_run(j) for j in jobs]
    if dump_path is not None:
        with open(dump_path, "w") as fh:
            for _, line in results:
                fh.write(line + "\n")
    values = np.array([v for v, _ in results], dtype=np.float64)
    return BatchResult(list(rules), [s.name for s in metrics], values,
                       [run_seed(config.seed, i) for i in range(config.runs)])
