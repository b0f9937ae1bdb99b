"""Grader behaviour: how a grader turns a bundle into a ranking.

All samplers work on *true bundle ranks*: item ``j`` (0-based) is the paper
ranked ``j``-th in the ground truth among the bundle.  A grading outcome is a
permutation ``pos`` where ``pos[j]`` is the 0-based position the grader gives
to true rank ``j``.  Batched samplers return one such row per grader.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .noise import NoiseMatrix, identity

MAX_RESTARTS = 1_000_000


# --------------------------------------------------------------------------- Mallows grading

@lru_cache(maxsize=None)
def _pair_incidence(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (a, b) with a truly ahead of b, as one-hot (pairs x m) matrices."""
    a, b = np.triu_indices(m, 1)
    first = np.zeros((a.size, m), dtype=np.int16)
    second = np.zeros((a.size, m), dtype=np.int16)
    first[np.arange(a.size), a] = 1
    second[np.arange(a.size), b] = 1
    return first, second


def mallows_positions(qualities: np.ndarray, m: int, rng: np.random.Generator,
                      max_restarts: int = MAX_RESTARTS) -> np.ndarray:
    """Pairwise-flip grading for a batch of graders.

    For every pair of items the truly better one is kept ahead with the
    grader's quality ``q``, independently; cyclic outcomes are redrawn from
    scratch.  Returns an array ``(len(qualities), m)`` of positions.
    """
    q = np.asarray(qualities, dtype=float)
    if q.size and (q.min() < 0.5 or q.max() > 1):
        raise ValueError("grader quality must lie in [1/2, 1]")
    if m < 1:
        raise ValueError("bundle must hold at least one item")
    out = np.empty((q.size, m), dtype=np.int64)
    if m == 1:
        out[:] = 0
        return out
    first, second = _pair_incidence(m)
    todo = np.arange(q.size)
    rounds = 0
    while todo.size:
        rounds += 1
        if rounds > max_restarts:
            raise RuntimeError(f"pairwise grading did not produce an acyclic outcome after {max_restarts} draws")
        keep = (rng.random((todo.size, first.shape[0])) < q[todo, None]).astype(np.int16)
        wins = keep @ first + (1 - keep) @ second
        # a tournament is acyclic iff its win counts are exactly 0..m-1
        acyclic = (np.sort(wins, axis=1) == np.arange(m)).all(axis=1)
        out[todo[acyclic]] = m - 1 - wins[acyclic]
        todo = todo[~acyclic]
    return out


def mallows_grade(true_order: Sequence, quality, rng: np.random.Generator,
                  max_restarts: int = MAX_RESTARTS) -> list:
    """Rank ``true_order`` (best first) the way a pairwise-flip grader of ``quality`` would."""
    items = list(true_order)
    if len(items) < 2:
        raise ValueError("need at least two items to grade")
    if len(set(items)) != len(items):
        raise ValueError("items must be distinct")
    q = Fraction(quality) if not isinstance(quality, float) else quality
    if q < Fraction(1, 2) or q > 1:
        raise ValueError(f"quality must lie in [1/2, 1], got {quality}")
    pos = mallows_positions(np.array([float(q)]), len(items), rng, max_restarts)[0]
    out = [None] * len(items)
    for j, p in enumerate(pos):
        out[p] = items[j]
    return out


# --------------------------------------------------------------------------- fixed distance

@lru_cache(maxsize=None)
def inversion_counts(m: int) -> tuple[tuple[int, ...], ...]:
    """``table[i][d]``: permutations of ``i`` items with ``d`` inversions, for i = 0..m."""
    table = [(1,)]
    for i in range(1, m + 1):
        prev = table[-1]
        width = i * (i - 1) // 2 + 1
        row = []
        for d in range(width):
            row.append(sum(prev[d - c] for c in range(i) if 0 <= d - c < len(prev)))
        table.append(tuple(row))
    return tuple(table)


def uniform_at_distance(m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random positions vector with exactly ``d`` inversions (Kendall tau to identity)."""
    if not 0 <= d <= m * (m - 1) // 2:
        raise ValueError(f"distance {d} impossible for {m} items")
    table = inversion_counts(m)
    # item v is inserted before c_v of the v items already placed
    c = [0] * m
    left = d
    for v in range(m - 1, -1, -1):
        sub = table[v]
        weights = np.array([sub[left - x] if 0 <= left - x < len(sub) else 0 for x in range(v + 1)], dtype=float)
        x = int(rng.choice(v + 1, p=weights / weights.sum()))
        c[v] = x
        left -= x
    ranking: list[int] = []
    for v in range(m):
        ranking.insert(len(ranking) - c[v], v)
    pos = np.empty(m, dtype=np.int64)
    pos[ranking] = np.arange(m)
    return pos


# --------------------------------------------------------------------------- matrix samplers

def birkhoff_decomposition(matrix: NoiseMatrix) -> list[tuple[Fraction, tuple[int, ...]]]:
    """Exact convex combination of permutation matrices equal to ``matrix``.

    Returns ``(weight, perm)`` pairs where ``perm[j]`` is the position given to
    true rank ``j``; weights are positive and sum to 1.
    """
    from scipy.optimize import linear_sum_assignment

    if not matrix.is_doubly_stochastic():
        raise ValueError(f"matrix {matrix.label!r} must be exactly doubly stochastic; balance it first")
    k = matrix.k
    rest = [list(r) for r in matrix.entries]
    parts = []
    while True:
        support = np.array([[float(x) for x in r] for r in rest])
        if not (support > 0).any():
            break
        # a perfect matching inside the support exists by Birkhoff's theorem
        cost = np.where(support > 0, -support, 1e9)
        rows, cols = linear_sum_assignment(cost)
        if any(rest[i][j] <= 0 for i, j in zip(rows, cols)):
            raise ArithmeticError("no perfect matching on the support; matrix is not doubly stochastic")
        w = min(rest[i][j] for i, j in zip(rows, cols))
        perm = [0] * k
        for i, j in zip(rows, cols):
            rest[i][j] -= w
            perm[j] = int(i)
        parts.append((w, tuple(perm)))
    if sum(w for w, _ in parts) != 1:
        raise ArithmeticError("decomposition weights do not sum to 1")
    return parts


def birkhoff_positions(matrix: NoiseMatrix, count: int, rng: np.random.Generator) -> np.ndarray:
    """Permutations drawn from the Birkhoff decomposition; marginals equal the matrix exactly."""
    parts = _cached_decomposition(matrix)
    weights = np.array([float(w) for w, _ in parts])
    perms = np.array([p for _, p in parts], dtype=np.int64)
    return perms[rng.choice(len(parts), size=count, p=weights / weights.sum())]


@lru_cache(maxsize=32)
def _cached_decomposition(matrix: NoiseMatrix):
    return birkhoff_decomposition(matrix)


def sequential_positions(matrix: NoiseMatrix | np.ndarray, count: int, rng: np.random.Generator,
                         max_restarts: int = 1000) -> np.ndarray:
    """Sequential sampler matching a noise matrix only approximately.

    True ranks are placed in order; rank ``j`` takes a free position with
    probability proportional to column ``j`` of the matrix.  A draw that gets
    stuck (all remaining mass zero) is restarted.  Exact for k <= 2; for larger
    k the later columns drift noticeably from the matrix.
    """
    p = matrix.to_float() if isinstance(matrix, NoiseMatrix) else np.asarray(matrix, dtype=float)
    k = p.shape[0]
    out = np.empty((count, k), dtype=np.int64)
    todo = np.arange(count)
    for _ in range(max_restarts):
        if not todo.size:
            return out
        free = np.ones((todo.size, k), dtype=bool)
        pos = np.empty((todo.size, k), dtype=np.int64)
        stuck = np.zeros(todo.size, dtype=bool)
        for j in range(k):
            w = p[:, j][None, :] * free
            tot = w.sum(axis=1)
            stuck |= tot <= 0
            cum = np.cumsum(w, axis=1)
            u = rng.random(todo.size) * np.where(tot > 0, tot, 1)
            choice = np.minimum((cum <= u[:, None]).sum(axis=1), k - 1)
            # guard against landing on a zero-weight slot through rounding
            choice = np.where(free[np.arange(todo.size), choice], choice, np.argmax(free, axis=1))
            pos[:, j] = choice
            free[np.arange(todo.size), choice] = False
        out[todo[~stuck]] = pos[~stuck]
        todo = todo[stuck]
    raise RuntimeError("matrix sampler kept getting stuck; is the matrix doubly stochastic?")


MATRIX_SAMPLERS = ("birkhoff", "sequential")


def marginal_positions(matrix: NoiseMatrix, count: int, rng: np.random.Generator,
                       method: str = "birkhoff") -> np.ndarray:
    if method == "birkhoff":
        return birkhoff_positions(matrix, count, rng)
    if method == "sequential":
        return sequential_positions(matrix, count, rng)
    raise ValueError(f"unknown matrix sampler {method!r}; use one of {MATRIX_SAMPLERS}")


def marginal_sample(matrix: NoiseMatrix, true_order: Sequence, rng: np.random.Generator,
                    method: str = "birkhoff") -> list:
    """Rank ``true_order`` (best first) by a grader described only by a noise matrix."""
    items = list(true_order)
    if len(items) != matrix.k:
        raise ValueError(f"bundle of {len(items)} items does not match a {matrix.k}x{matrix.k} matrix")
    pos = marginal_positions(matrix, 1, rng, method)[0]
    out = [None] * len(items)
    for j, p in enumerate(pos):
        out[p] = items[j]
    return out


# --------------------------------------------------------------------------- empirical table

@dataclass(frozen=True)
class EmpiricalGraderTable:
    """Bubble support: graders with a given exam grade and ranking error, with counts."""

    quality: tuple[Fraction, ...]
    kt_error: tuple[int, ...]
    count: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.quality) == len(self.kt_error) == len(self.count)) or not self.count:
            raise ValueError("grader table needs equally long, non-empty columns")
        if any(c <= 0 for c in self.count):
            raise ValueError("grader counts must be positive")
        if any(e < 0 for e in self.kt_error):
            raise ValueError("Kendall tau errors must be non-negative")

    def check_k(self, k: int) -> None:
        worst = max(self.kt_error)
        if worst > k * (k - 1) // 2:
            raise ValueError(f"Kendall tau error {worst} impossible for bundles of {k}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "EmpiricalGraderTable":
        q, e, c = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                q.append(Fraction(row["quality"].strip()))
                e.append(int(row["kt_error"]))
                c.append(int(row["count"]))
        return cls(tuple(q), tuple(e), tuple(c))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quality", "kt_error", "count"])
            for row in zip(self.quality, self.kt_error, self.count):
                w.writerow([str(row[0]), row[1], row[2]])

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Bubble indices drawn with probability proportional to their counts."""
        p = np.array(self.count, dtype=float)
        return rng.choice(len(self.count), size=size, p=p / p.sum())


# --------------------------------------------------------------------------- models

GRADER_VARIANTS = ("perfect", "mallows-quality", "empirical-table", "marginal-matrix")


@dataclass(frozen=True)
class GraderModel:
    variant: str
    matrix: NoiseMatrix | None = None
    table: EmpiricalGraderTable | None = None
    sampler: str = "birkhoff"

    def __post_init__(self):
        if self.variant not in GRADER_VARIANTS:
            raise ValueError(f"unknown grader model {self.variant!r}; use one of {GRADER_VARIANTS}")
        if self.variant == "marginal-matrix" and self.matrix is None:
            raise ValueError("marginal-matrix grading needs a noise matrix")
        if self.variant == "empirical-table" and self.table is None:
            raise ValueError("empirical-table grading needs a grader table")

    @classmethod
    def perfect(cls) -> "GraderModel":
        return cls("perfect")

    @classmethod
    def mallows(cls) -> "GraderModel":
        return cls("mallows-quality")

    @classmethod
    def marginal(cls, matrix: NoiseMatrix, sampler: str = "birkhoff") -> "GraderModel":
        return cls("marginal-matrix", matrix=matrix, sampler=sampler)

    @classmethod
    def empirical(cls, table: EmpiricalGraderTable) -> "GraderModel":
        return cls("empirical-table", table=table)

    @property
    def label(self) -> str:
        if self.variant == "marginal-matrix":
            return f"matrix:{self.matrix.label}"
        return self.variant

    def grader_qualities(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
        """Student qualities and, for table-driven graders, each student's bubble index."""
        if self.variant == "empirical-table":
            bubbles = self.table.draw(n, rng)
            grades = np.array([float(g) for g in self.table.quality])[bubbles]
            # jitter well below the table's grade spacing gives a strict ground truth
            spacing = np.diff(np.unique(grades)).min() if np.unique(grades).size > 1 else 1.0
            return grades + rng.uniform(0, spacing / 2, n), bubbles
        return rng.uniform(0.5, 1.0, n), None

    def positions(self, k: int, qualities: np.ndarray, rng: np.random.Generator,
                  bubbles: np.ndarray | None = None) -> np.ndarray:
        """One grading outcome (positions by true bundle rank) per grader."""
        count = len(qualities)
        if self.variant == "perfect":
            return np.tile(np.arange(k), (count, 1))
        if self.variant == "mallows-quality":
            return mallows_positions(qualities, k, rng)
        if self.variant == "marginal-matrix":
            if self.matrix.k != k:
                raise ValueError(f"grader matrix is {self.matrix.k}x{self.matrix.k}, bundles have {k}")
            return marginal_positions(self.matrix, count, rng, self.sampler)
        self.table.check_k(k)
        if bubbles is None:
            bubbles = self.table.draw(count, rng)
        dist = np.array(self.table.kt_error)[bubbles]
        return np.array([uniform_at_distance(k, int(d), rng) for d in dist], dtype=np.int64).reshape(count, k)


def estimate_matrix(model: GraderModel, k: int, samples: int, rng: np.random.Generator,
                    chunk: int = 200_000) -> NoiseMatrix:
    """Empirical noise matrix from ``samples`` independent grading episodes.

    Entry (i, j) is the fraction of episodes in which true rank j landed at
    position i; each episode adds one permutation matrix, so the result is
    exactly doubly stochastic.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if model.variant == "perfect":
        return identity(k)
    counts = np.zeros((k, k), dtype=np.int64)
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        qualities, bubbles = model.grader_qualities(size, rng)
        pos = model.positions(k, qualities, rng, bubbles)
        np.add.at(counts, (pos.ravel(), np.tile(np.arange(k), size)), 1)
        done += size
    rows = tuple(tuple(Fraction(int(c), samples) for c in r) for r in counts)
    return NoiseMatrix(rows, label=f"{model.variant}-{samples}")
