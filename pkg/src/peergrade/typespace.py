"""Type space of a bundle size k: types, Borda scores, multiplicities, orderings.

A *type* is the sorted vector of the k positions a paper received from its
k graders.  Types are stored as :class:`RankType`, a tuple subclass, so they
hash, compare lexicographically and serialize to JSON as plain integer lists.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_K = 8

TIE_BREAKS = ("lex", "random")


class RankType(tuple):
    """Canonical (non-decreasing) vector of the k ranks a paper received."""

    __slots__ = ()

    def __new__(cls, entries: Iterable[int]):
        entries = tuple(int(e) for e in entries)
        k = len(entries)
        if k == 0:
            raise ValueError("a type needs at least one entry")
        if any(e < 1 or e > k for e in entries):
            raise ValueError(f"type entries must lie in [1, {k}]: {entries}")
        if any(a > b for a, b in zip(entries, entries[1:])):
            raise ValueError(f"type entries must be non-decreasing: {entries}")
        return super().__new__(cls, entries)

    @property
    def k(self) -> int:
        return len(self)

    def __repr__(self) -> str:
        return "(" + ",".join(map(str, self)) + ")"


def _check_k(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1 or k > MAX_K:
        raise ValueError(f"bundle size k must be an integer in [1, {MAX_K}], got {k!r}")


@lru_cache(maxsize=None)
def enumerate_types(k: int) -> tuple[RankType, ...]:
    """All binomial(2k-1, k) types of bundle size k, in lexicographic order."""
    _check_k(k)
    return tuple(
        RankType(c) for c in itertools.combinations_with_replacement(range(1, k + 1), k)
    )


def type_of(rank_vector: Sequence[int]) -> RankType:
    """Canonical type of the ranks one paper got from its graders (any order)."""
    v = [int(r) for r in rank_vector]
    k = len(v)
    if k == 0:
        raise ValueError("empty rank vector")
    bad = [r for r in v if r < 1 or r > k]
    if bad:
        raise ValueError(f"rank entries must lie in [1, {k}], got {bad}")
    return RankType(sorted(v))


def borda_score(sigma: Sequence[int]) -> int:
    k = len(sigma)
    return k * k + k - sum(sigma)


def multiplicity(sigma: Sequence[int]) -> int:
    """Number of rank vectors whose sorted form is ``sigma``: k!/(d_1!...d_k!)."""
    n = math.factorial(len(sigma))
    for d in Counter(sigma).values():
        n //= math.factorial(d)
    return n


@dataclass(frozen=True)
class TypeOrdering:
    """A strict total order over all types of one bundle size, best first."""

    ordered: tuple[RankType, ...]
    provenance: str = "loaded"
    exact: tuple[bool, ...] | None = None
    _position: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ordered = tuple(RankType(t) for t in self.ordered)
        object.__setattr__(self, "ordered", ordered)
        if not ordered:
            raise ValueError("empty ordering")
        k = ordered[0].k
        if sorted(ordered) != list(enumerate_types(k)):
            raise ValueError(f"ordering is not a permutation of the k={k} type space")
        if self.exact is None:
            object.__setattr__(self, "exact", (True,) * len(ordered))
        elif len(self.exact) != len(ordered):
            raise ValueError("exactness flags must match the number of types")
        else:
            object.__setattr__(self, "exact", tuple(bool(e) for e in self.exact))
        object.__setattr__(self, "_position", {t: i for i, t in enumerate(ordered)})

    @property
    def k(self) -> int:
        return self.ordered[0].k

    def __len__(self) -> int:
        return len(self.ordered)

    def position(self, sigma: Sequence[int]) -> int:
        """0-based rank of ``sigma`` in the ordering (0 = best)."""
        return self._position[RankType(sigma)]

    def positions(self) -> np.ndarray:
        """Rank of each type, indexed by canonical (lexicographic) type index."""
        return np.array([self._position[t] for t in enumerate_types(self.k)], dtype=np.int64)

    def reversed(self) -> "TypeOrdering":
        return TypeOrdering(self.ordered[::-1], provenance=self.provenance, exact=self.exact[::-1])

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "provenance": self.provenance,
            "ordered": [list(t) for t in self.ordered],
            "exact": list(self.exact),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TypeOrdering":
        return cls(
            tuple(RankType(t) for t in data["ordered"]),
            provenance=data.get("provenance", "loaded"),
            exact=tuple(data["exact"]) if "exact" in data else None,
        )


def borda_ordering(k: int, tie_break: str = "lex", rng: np.random.Generator | None = None) -> TypeOrdering:
    """Types sorted by decreasing Borda score.

    Equal scores are ordered lexicographically (``tie_break="lex"``) or
    uniformly at random from ``rng`` (``tie_break="random"``).
    """
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"unknown tie-break policy {tie_break!r}; use one of {TIE_BREAKS}")
    types = enumerate_types(k)
    if tie_break == "lex":
        ordered = sorted(types, key=lambda t: (-borda_score(t), t))
    else:
        if rng is None:
            raise ValueError("random tie-break needs an rng")
        noise = rng.random(len(types))
        idx = sorted(range(len(types)), key=lambda i: (-borda_score(types[i]), noise[i]))
        ordered = [types[i] for i in idx]
    return TypeOrdering(tuple(ordered), provenance="borda")


@lru_cache(maxsize=None)
def type_index_table(k: int) -> np.ndarray:
    """Lookup from base-(k+1) code of a sorted rank vector to canonical type index.

    ``code(sigma) = sum(sigma[i] * (k+1)**(k-1-i))``; unused codes map to -1.
    """
    table = np.full((k + 1) ** k, -1, dtype=np.int64)
    weights = (k + 1) ** np.arange(k - 1, -1, -1)
    for i, t in enumerate(enumerate_types(k)):
        table[int(np.dot(t, weights))] = i
    return table


def type_indices(rank_rows: np.ndarray) -> np.ndarray:
    """Canonical type index for each row of an (n, k) array of received ranks."""
    rank_rows = np.sort(np.asarray(rank_rows, dtype=np.int64), axis=1)
    k = rank_rows.shape[1]
    if rank_rows.min(initial=1) < 1 or rank_rows.max(initial=1) > k:
        raise ValueError(f"rank entries must lie in [1, {k}]")
    weights = (k + 1) ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return type_index_table(k)[rank_rows @ weights]
