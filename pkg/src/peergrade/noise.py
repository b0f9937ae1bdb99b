"""Noise matrices: built-in tables, JSON loading, validation and balancing.

Entry ``(i, j)`` of a noise matrix (1-based in prose, 0-based in code) is the
probability that the paper with true bundle-rank ``j`` is placed at position
``i`` by a grader.  Entries are exact :class:`~fractions.Fraction` values;
printed decimals are parsed exactly (``"0.6337" -> 6337/10000``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

# Grading noise of quality-dependent pairwise-flip graders, k = 6.
_MALLOWS6 = """
0.6337 0.1753 0.0824 0.0494 0.0339 0.0253
0.1753 0.5112 0.1549 0.0768 0.0479 0.0339
0.0824 0.1549 0.4865 0.1500 0.0768 0.0494
0.0494 0.0768 0.1500 0.4865 0.1549 0.0824
0.0339 0.0479 0.0768 0.1549 0.5112 0.1753
0.0253 0.0339 0.0494 0.0824 0.1753 0.6337
"""

# Frequencies measured on 136 human graders, k = 6, as printed (truncated to
# 3 decimals, so rows sum to 0.996..1.001).
_REAL6_PRINTED = """
0.463 0.257 0.102 0.058 0.058 0.058
0.205 0.316 0.227 0.110 0.066 0.073
0.161 0.191 0.257 0.205 0.132 0.051
0.102 0.117 0.191 0.242 0.279 0.066
0.044 0.066 0.139 0.220 0.301 0.227
0.022 0.051 0.080 0.161 0.161 0.522
"""

# The same measurement as integer counts out of 136 graders; the printed table
# is these counts divided by 136 and truncated.  Exactly doubly stochastic.
_REAL6_COUNTS = (
    (63, 35, 14, 8, 8, 8),
    (28, 43, 31, 15, 9, 10),
    (22, 26, 35, 28, 18, 7),
    (14, 16, 26, 33, 38, 9),
    (6, 9, 19, 30, 41, 31),
    (3, 7, 11, 22, 22, 71),
)
REAL6_GRADERS = 136

# Matrices estimated from 100 and 1000 sampled pairwise-flip graders.
_P100 = """
0.59 0.19 0.07 0.08 0.06 0.01
0.19 0.44 0.18 0.09 0.04 0.06
0.10 0.19 0.43 0.19 0.07 0.02
0.05 0.05 0.15 0.45 0.19 0.11
0.06 0.10 0.09 0.14 0.46 0.15
0.01 0.03 0.08 0.05 0.18 0.65
"""

_P1000 = """
0.639 0.186 0.066 0.058 0.031 0.020
0.193 0.534 0.150 0.055 0.032 0.036
0.073 0.149 0.501 0.147 0.076 0.054
0.039 0.075 0.155 0.497 0.147 0.087
0.033 0.038 0.071 0.163 0.517 0.178
0.023 0.018 0.057 0.080 0.197 0.625
"""

_TABLES = {"mallows6": _MALLOWS6, "real6-printed": _REAL6_PRINTED, "p100": _P100, "p1000": _P1000}

BUILTIN_NAMES = ("mallows6", "real6", "real6-printed", "p100", "p1000", "identity(k)")

DEFAULT_TOLERANCE = Fraction(1, 50)

# IPF stops once every row/column sum is this close to 1.
BALANCE_TARGET = 1e-12

# Balanced entries are snapped to this grid before the exact final correction.
BALANCE_DENOMINATOR = 10**15


class NoiseMatrixError(ValueError):
    """A matrix failed validation (shape, sign or stochasticity)."""


@dataclass(frozen=True)
class NoiseMatrix:
    entries: tuple[tuple[Fraction, ...], ...]
    label: str = ""

    def __post_init__(self):
        rows = tuple(tuple(Fraction(x) for x in row) for row in self.entries)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise NoiseMatrixError("noise matrix must be square and non-empty")
        if any(x < 0 or x > 1 for r in rows for x in r):
            raise NoiseMatrixError("noise matrix entries must lie in [0, 1]")
        object.__setattr__(self, "entries", rows)

    @property
    def k(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.entries[i][j]

    def row_sums(self) -> list[Fraction]:
        return [sum(r, Fraction(0)) for r in self.entries]

    def col_sums(self) -> list[Fraction]:
        return [sum(col, Fraction(0)) for col in zip(*self.entries)]

    def max_deviation(self) -> Fraction:
        return max(abs(s - 1) for s in self.row_sums() + self.col_sums())

    def is_doubly_stochastic(self) -> bool:
        return self.max_deviation() == 0

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.entries])

    def integer_form(self) -> tuple[list[list[int]], int]:
        """Entries as integers over one common denominator."""
        den = math.lcm(*(x.denominator for r in self.entries for x in r))
        return [[int(x * den) for x in r] for r in self.entries], den

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.entries:
            h.update((",".join(f"{x.numerator}/{x.denominator}" for x in r) + ";").encode())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "label": self.label,
            "rows": [[_exact_str(x) for x in r] for r in self.entries],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NoiseMatrix":
        rows = [[_parse_exact(x) for x in r] for r in data["rows"]]
        m = cls(tuple(map(tuple, rows)), label=data.get("label", ""))
        if "k" in data and data["k"] != m.k:
            raise NoiseMatrixError(f"declared k={data['k']} but matrix is {m.k}x{m.k}")
        return m


def _parse_exact(x) -> Fraction:
    if isinstance(x, float):
        raise NoiseMatrixError("matrix entries must be strings or integers, not floats")
    return Fraction(str(x).strip())


def _exact_str(x: Fraction) -> str:
    """Shortest exact decimal if one exists, else ``num/den``."""
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    places = max(twos, fives)
    if places == 0:
        return str(x.numerator)
    digits = str(abs(x.numerator) * 10**places // x.denominator).rjust(places + 1, "0")
    sign = "-" if x < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def identity(k: int) -> NoiseMatrix:
    return NoiseMatrix(
        tuple(tuple(Fraction(int(i == j)) for j in range(k)) for i in range(k)),
        label=f"identity{k}",
    )


def builtin_matrix(name: str) -> NoiseMatrix:
    """Built-in matrix by name (see ``BUILTIN_NAMES``); ``identity6`` also works."""
    key = name.strip().lower()
    if key == "real6":
        rows = tuple(tuple(Fraction(c, REAL6_GRADERS) for c in r) for r in _REAL6_COUNTS)
        return NoiseMatrix(rows, label="real6")
    if key.startswith("identity"):
        digits = key[len("identity"):].strip("()")
        if digits.isdigit() and int(digits) >= 1:
            return identity(int(digits))
    if key in _TABLES:
        rows = [line.split() for line in _TABLES[key].strip().splitlines()]
        return NoiseMatrix(tuple(tuple(Fraction(x) for x in r) for r in rows), label=key)
    raise KeyError(f"unknown noise matrix {name!r}; available: {', '.join(BUILTIN_NAMES)}")


def load_matrix(source: str | Path) -> NoiseMatrix:
    """Built-in name or path to a noise-matrix JSON file."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        return NoiseMatrix.from_json(json.loads(path.read_text()))
    return builtin_matrix(str(source))


def save_matrix(matrix: NoiseMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(matrix.to_json(), indent=1) + "\n")


def validate_and_balance(
    matrix: NoiseMatrix,
    tolerance: Fraction | float | str = DEFAULT_TOLERANCE,
    balance: bool = True,
) -> NoiseMatrix:
    """Reject matrices far from doubly stochastic; optionally make them exactly so.

    Balancing runs iterative proportional fitting (alternate row and column
    normalization) in floating point until every sum is within 1e-12 of 1,
    snaps entries to a 1e-15 grid and then absorbs the remaining residue in
    the last row and column, so the returned rationals are exactly doubly
    stochastic.  Exactly stochastic inputs are returned unchanged.
    """
    tolerance = Fraction(str(tolerance)) if isinstance(tolerance, float) else Fraction(tolerance)
    rows, cols = matrix.row_sums(), matrix.col_sums()
    worst_row = max(range(matrix.k), key=lambda i: abs(rows[i] - 1))
    worst_col = max(range(matrix.k), key=lambda j: abs(cols[j] - 1))
    dev_row, dev_col = abs(rows[worst_row] - 1), abs(cols[worst_col] - 1)
    if max(dev_row, dev_col) > tolerance:
        raise NoiseMatrixError(
            f"matrix {matrix.label!r} is not doubly stochastic within {float(tolerance):g}: "
            f"row {worst_row + 1} sums to {float(rows[worst_row]):.6f}, "
            f"column {worst_col + 1} sums to {float(cols[worst_col]):.6f}"
        )
    if not balance or matrix.is_doubly_stochastic():
        return matrix
    return NoiseMatrix(_balance(matrix), label=matrix.label + "+balanced")


def _balance(matrix: NoiseMatrix, max_iter: int = 100_000):
    a = matrix.to_float()
    for _ in range(max_iter):
        a /= a.sum(axis=1, keepdims=True)
        a /= a.sum(axis=0, keepdims=True)
        dev = max(np.abs(a.sum(axis=1) - 1).max(), np.abs(a.sum(axis=0) - 1).max())
        if dev < BALANCE_TARGET:
            break
    else:
        raise NoiseMatrixError(f"balancing {matrix.label!r} did not converge")

    k = matrix.k
    d = BALANCE_DENOMINATOR
    out = [[Fraction(round(a[i, j] * d), d) for j in range(k)] for i in range(k)]
    for i in range(k - 1):
        out[i][k - 1] = 1 - sum(out[i][: k - 1])
    for j in range(k - 1):
        out[k - 1][j] = 1 - sum(out[i][j] for i in range(k - 1))
    out[k - 1][k - 1] = 1 - sum(out[k - 1][: k - 1])
    if any(x < 0 for r in out for x in r):
        raise NoiseMatrixError(f"balancing {matrix.label!r} produced a negative entry")
    return tuple(map(tuple, out))


def prepare(matrix: NoiseMatrix, tolerance=DEFAULT_TOLERANCE, balance: bool = True) -> NoiseMatrix:
    """Validate and (by default) balance a matrix before theory computations."""
    return validate_and_balance(matrix, tolerance, balance)

