"""Scoring a final ranking against the ground truth.

Rankings are sequences of item ids, best first, over the items ``0..n-1``.
True ranks are 1-based: the best paper has rank 1.  A pair of true ranks
``r < s`` qualifies for an objective when ``alpha <= r/n <= beta`` and
``r/n + gamma <= s/n <= delta``; for the standard objectives this reads
``r <= a*n`` (th-a) and ``s - r >= b*n`` (acc-b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .theory import ObjectiveSpec


def rank_positions(ranking: Sequence[int]) -> np.ndarray:
    """``pos[item]`` = 0-based place of ``item`` in ``ranking``."""
    ranking = np.asarray(ranking, dtype=np.int64)
    pos = np.full(ranking.size, -1, dtype=np.int64)
    pos[ranking] = np.arange(ranking.size)
    if (pos < 0).any():
        raise ValueError("ranking is not a permutation of 0..n-1")
    return pos


def _final_by_truth(final, truth) -> np.ndarray:
    """Final position of the paper with true rank r (0-based r)."""
    truth = np.asarray(truth, dtype=np.int64)
    final_pos = rank_positions(final)
    if final_pos.size != truth.size:
        raise ValueError("rankings have different lengths")
    rank_positions(truth)
    return final_pos[truth]


def _window(spec: ObjectiveSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """For every 1-based true rank r, the inclusive range [lo, hi] of partner ranks s."""
    r = np.arange(1, n + 1)
    r_ok = (r * spec.alpha.denominator >= spec.alpha.numerator * n) & (
        r * spec.beta.denominator <= spec.beta.numerator * n
    )
    gap = math.ceil(spec.gamma * n)
    hi = math.floor(spec.delta * n)
    lo = np.maximum(r + 1, r + gap)
    lo = np.where(r_ok, lo, n + 1)
    return lo, np.full(n, hi)


def recovered_fractions(final, truth, specs: Sequence[ObjectiveSpec], chunk: int = 1024) -> list[Fraction]:
    """``recovered_fraction`` for several objectives sharing one pass over the pairs."""
    f = _final_by_truth(final, truth)
    n = f.size
    windows = [_window(s, n) for s in specs]
    correct = [0] * len(specs)
    for start in range(0, n, chunk):
        rows = slice(start, min(n, start + chunk))
        ahead = f[rows, None] < f[None, :]
        # prefix[i, s] = correctly ordered partners among true ranks 1..s
        prefix = np.zeros((ahead.shape[0], n + 1), dtype=np.int32)
        np.cumsum(ahead, axis=1, out=prefix[:, 1:])
        idx = np.arange(ahead.shape[0])
        for m, (lo, hi) in enumerate(windows):
            l, h = lo[rows], hi[rows]
            valid = l <= h
            lc, hc = np.minimum(l, n + 1) - 1, np.minimum(h, n)
            got = prefix[idx, hc] - prefix[idx, np.minimum(lc, n)]
            correct[m] += int(got[valid].sum())
    out = []
    for m, (lo, hi) in enumerate(windows):
        total = int(np.clip(hi - lo + 1, 0, None).sum())
        if total == 0:
            raise ValueError(f"objective {specs[m].name!r} has no qualifying pairs at n={n}")
        out.append(Fraction(correct[m], total))
    return out


def recovered_fraction(final, truth, spec: ObjectiveSpec, n: int | None = None) -> Fraction:
    """Fraction of qualifying true pairs that ``final`` orders correctly."""
    if n is not None and n != len(truth):
        raise ValueError(f"n={n} but the rankings have {len(truth)} items")
    return recovered_fractions(final, truth, [spec])[0]


def kendall_tau(r1: Sequence, r2: Sequence) -> int:
    """Number of item pairs ordered differently by two rankings (merge-sort count)."""
    if len(r1) != len(r2):
        raise ValueError("rankings have different lengths")
    where = {item: i for i, item in enumerate(r2)}
    if len(where) != len(r2) or set(where) != set(r1):
        raise ValueError("rankings must order the same distinct items")
    _, count = _sort_count([where[item] for item in r1])
    return count


def _sort_count(seq: list[int]) -> tuple[list[int], int]:
    if len(seq) <= 1:
        return seq, 0
    mid = len(seq) // 2
    left, a = _sort_count(seq[:mid])
    right, b = _sort_count(seq[mid:])
    merged, i, j, c = [], 0, 0, 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            c += len(left) - i
            j += 1
    merged += left[i:]
    merged += right[j:]
    return merged, a + b + c


PERCENT_GRID = np.arange(0, 101)


def displacement_cdf(final, truth, n: int | None = None, grid=PERCENT_GRID) -> list[tuple[float, float]]:
    """(x, y): y% of the students are displaced by at least x% of n."""
    f = _final_by_truth(final, truth)
    n = f.size
    shift = np.abs(f - np.arange(n))
    return [(float(x), 100.0 * np.count_nonzero(shift * 100 >= x * n) / n) for x in grid]


def interval_displacement(final, truth, n: int | None = None, grid=PERCENT_GRID[1:]) -> list[tuple[float, float]]:
    """(x, y): y% of the true top x% are also in the final top x%."""
    f = _final_by_truth(final, truth)
    n = f.size
    out = []
    for x in grid:
        m = max(1, round(x * n / 100))
        out.append((float(x), 100.0 * np.count_nonzero(f[:m] < m) / m))
    return out


def top_quantile_distribution(final, truth, n: int | None = None, quantile=0.2, bin=0.05) -> list[tuple[float, float]]:
    """(x, y): y% of the true top-``quantile`` students end up in final places ((x-bin)%, x%]."""
    f = _final_by_truth(final, truth)
    n = f.size
    cohort = f[: max(1, round(quantile * n))]
    bins = round(1 / bin)
    which = np.minimum(cohort * bins // n, bins - 1)
    counts = np.bincount(which, minlength=bins)
    return [(round(100 * bin * (b + 1), 6), 100.0 * counts[b] / cohort.size) for b in range(bins)]


@dataclass
class MetricReport:
    fractions: dict[str, Fraction]
    displacement: list[tuple[float, float]] = field(default_factory=list)
    interval: list[tuple[float, float]] = field(default_factory=list)
    top20: list[tuple[float, float]] = field(default_factory=list)
    kendall_tau: int = 0


def metric_report(final, truth, specs: Sequence[ObjectiveSpec]) -> MetricReport:
    values = recovered_fractions(final, truth, specs)
    return MetricReport(
        fractions={s.name: v for s, v in zip(specs, values)},
        displacement=displacement_cdf(final, truth),
        interval=interval_displacement(final, truth),
        top20=top_quantile_distribution(final, truth),
        kendall_tau=kendall_tau(final, truth),
    )
