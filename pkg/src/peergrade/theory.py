"""Exact-rational theory: type polynomials, pairwise weights, predicted performance.

For a paper at normalized true position ``x`` (0 = best), the probability of
receiving type ``sigma`` is a polynomial of degree ``k*k - k`` in ``x``.  The
weight ``W(s, t)`` integrates ``Pr[x -> s] * Pr[y -> t]`` over the objective
region ``alpha <= x <= beta``, ``x + gamma <= y <= delta``.  All arithmetic is
exact; floats only appear in reports.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np

from .noise import NoiseMatrix
from .typespace import RankType, TypeOrdering, borda_score, enumerate_types, multiplicity


# --------------------------------------------------------------------------- objectives

@dataclass(frozen=True)
class ObjectiveSpec:
    """Indicator objective ``f(x, y) = [alpha <= x <= beta and x + gamma <= y <= delta]``."""

    name: str
    alpha: Fraction = Fraction(0)
    beta: Fraction = Fraction(1)
    gamma: Fraction = Fraction(0)
    delta: Fraction = Fraction(1)

    def __post_init__(self):
        for f in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, f, Fraction(getattr(self, f)))
        a, b, g, d = self.alpha, self.beta, self.gamma, self.delta
        if not (0 <= a <= b <= 1 and 0 <= g and d <= 1):
            raise ValueError(f"invalid objective tuple {self.tuple()}")
        if b + g > d:
            raise ValueError(f"objective {self.name!r} needs beta + gamma <= delta")
        if objective_mass(self) == 0:
            raise ValueError(f"objective {self.name!r} has zero mass")

    def tuple(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    def key(self) -> str:
        return "_".join(f"{x.numerator}-{x.denominator}" for x in self.tuple())

    def to_json(self) -> dict:
        return {"name": self.name, "tuple": [str(x) for x in self.tuple()]}


def all2all() -> ObjectiveSpec:
    return ObjectiveSpec("all2all")


def top(fraction) -> ObjectiveSpec:
    """Pairs whose better paper is in the top ``fraction`` of the ground truth."""
    fraction = Fraction(fraction)
    return ObjectiveSpec(f"th-{_pct(fraction)}%", beta=fraction)


def apart(fraction) -> ObjectiveSpec:
    """Pairs whose true positions differ by at least ``fraction``."""
    fraction = Fraction(fraction)
    return ObjectiveSpec(f"acc-{_pct(fraction)}%", beta=1 - fraction, gamma=fraction)


def _pct(f: Fraction) -> str:
    p = f * 100
    return str(p.numerator) if p.denominator == 1 else f"{float(p):g}"


STANDARD_OBJECTIVES = ("all2all", "th-10%", "th-50%", "acc-2%", "acc-5%")


def parse_objective(name: str) -> ObjectiveSpec:
    """``all2all``, ``th-<a>%``, ``acc-<b>%`` or ``custom:alpha,beta,gamma,delta``."""
    s = name.strip().lower()
    if s == "all2all":
        return all2all()
    m = re.fullmatch(r"(th|acc)-?(\d+(?:\.\d+)?)%?", s)
    if m:
        frac = Fraction(m.group(2)) / 100
        return top(frac) if m.group(1) == "th" else apart(frac)
    if s.startswith("custom:"):
        parts = [Fraction(p) for p in s[len("custom:"):].split(",")]
        if len(parts) != 4:
            raise ValueError("custom objective needs four values alpha,beta,gamma,delta")
        return ObjectiveSpec(name, *parts)
    raise ValueError(f"unknown objective {name!r}; use one of {STANDARD_OBJECTIVES} or custom:a,b,g,d")


def objective_mass(spec: ObjectiveSpec) -> Fraction:
    """Area of the objective region, the normalizer turning weights into fractions."""
    a, b, g, d = spec.tuple()
    # integrand delta - gamma - x is non-negative on [alpha, beta] since beta + gamma <= delta
    return (d - g) * (b - a) - (b * b - a * a) / 2


# --------------------------------------------------------------------------- polynomials

@dataclass(frozen=True)
class TypePolynomial:
    """``Pr[x -> sigma] = sum(coeffs[s] * x**s)``, stored as integers over one denominator."""

    sigma: RankType
    numerators: tuple[int, ...]
    denominator: int

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.denominator) for c in self.numerators)

    @property
    def degree(self) -> int:
        return len(self.numerators) - 1

    def __call__(self, x) -> Fraction:
        acc = 0
        if isinstance(x, float):
            for c in reversed(self.numerators):
                acc = acc * x + c
            return acc / self.denominator
        x = Fraction(x)
        for c in reversed(self.numerators):
            acc = acc * x + c
        return Fraction(acc) / self.denominator


def _polymul(a: Sequence[int], b: Sequence[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


@lru_cache(maxsize=64)
def _bernstein(k: int) -> tuple[tuple[int, ...], ...]:
    """Integer coefficients of ``binom(k-1, j) x^j (1-x)^(k-1-j)`` for j = 0..k-1."""
    basis = []
    for j in range(k):
        poly = [0] * k
        for i in range(k - j):
            poly[j + i] = comb(k - 1, j) * comb(k - j - 1, i) * (-1) ** i
        basis.append(tuple(poly))
    return tuple(basis)


def _position_polys(int_rows: list[list[int]]) -> list[list[int]]:
    """Per position i: ``sum_j p[i][j] * binom(k-1, j-1) x^(j-1) (1-x)^(k-j)`` (scaled)."""
    k = len(int_rows)
    basis = _bernstein(k)
    return [
        [sum(int_rows[i][j] * basis[j][s] for j in range(k)) for s in range(k)]
        for i in range(k)
    ]


def _check_dims(sigma: RankType, matrix: NoiseMatrix) -> None:
    if sigma.k != matrix.k:
        raise ValueError(f"type of size {sigma.k} does not match a {matrix.k}x{matrix.k} noise matrix")


def type_polynomial(sigma: Sequence[int], matrix: NoiseMatrix) -> TypePolynomial:
    """Probability that a paper at true position x gets type ``sigma``, as a polynomial."""
    sigma = RankType(sigma)
    _check_dims(sigma, matrix)
    int_rows, den = matrix.integer_form()
    return _type_polynomial(sigma, _position_polys(int_rows), den)


def _type_polynomial(sigma: RankType, position_polys, den: int) -> TypePolynomial:
    k = sigma.k
    poly = [multiplicity(sigma)]
    for s in sigma:
        poly = _polymul(poly, position_polys[s - 1])
    poly += [0] * (k * k - k + 1 - len(poly))
    return _reduced(sigma, poly, den**k)


def _reduced(sigma, numerators, denominator) -> TypePolynomial:
    g = math.gcd(denominator, *numerators)
    return TypePolynomial(sigma, tuple(c // g for c in numerators), denominator // g)


def type_polynomial_loops(sigma: Sequence[int], matrix: NoiseMatrix) -> TypePolynomial:
    """Literal k^k loop-nest expansion of the type polynomial; a cross-check for small k."""
    sigma = RankType(sigma)
    _check_dims(sigma, matrix)
    k = sigma.k
    if k > 4:
        raise ValueError("the loop-nest expansion is only meant for k <= 4")
    p = matrix.entries
    n_sigma = multiplicity(sigma)
    c = [Fraction(0)] * (k * k - k + 1)
    for ell in itertools.product(range(1, k + 1), repeat=k):
        norm = sum(ell)
        prod = Fraction(n_sigma)
        for i in range(k):
            prod *= p[sigma[i] - 1][ell[i] - 1] * comb(k - 1, ell[i] - 1)
        if prod == 0:
            continue
        for j in range(k * k - norm + 1):
            c[norm - k + j] += prod * comb(k * k - norm, j) * (-1) ** j
    den = math.lcm(*(x.denominator for x in c))
    return _reduced(sigma, [int(x * den) for x in c], den)


def all_type_polynomials(k: int, matrix: NoiseMatrix) -> list[TypePolynomial]:
    if matrix.k != k:
        raise ValueError(f"noise matrix is {matrix.k}x{matrix.k}, expected k={k}")
    int_rows, den = matrix.integer_form()
    pp = _position_polys(int_rows)
    return [_type_polynomial(t, pp, den) for t in enumerate_types(k)]


# --------------------------------------------------------------------------- weights

def _moments(lo: Fraction, hi: Fraction, count: int) -> list[Fraction]:
    """``(hi^(u+1) - lo^(u+1)) / (u+1)`` for u = 0..count-1."""
    out = []
    plo, phi = lo, hi
    for u in range(count):
        out.append((phi - plo) / (u + 1))
        plo *= lo
        phi *= hi
    return out


def inner_integral_coeffs(coeffs: Sequence[Fraction], spec: ObjectiveSpec) -> list[Fraction]:
    """Coefficients in x of ``integral_{x+gamma}^{delta} sum_s c_s y^s dy``."""
    g, d = spec.gamma, spec.delta
    n = len(coeffs)
    out = [Fraction(0)] * (n + 1)
    for s, c in enumerate(coeffs):
        if not c:
            continue
        e = Fraction(c, 1) / (s + 1)
        out[0] += e * d ** (s + 1)
        # (x + gamma)^(s+1) = sum_i binom(s+1, i) gamma^(s+1-i) x^i
        for i in range(s + 2):
            out[i] -= e * comb(s + 1, i) * g ** (s + 1 - i)
    return out


def weight(poly_a: TypePolynomial, poly_b: TypePolynomial, spec: ObjectiveSpec) -> Fraction:
    """``W(a, b)``: mass of pairs x < y with x of type a, y of type b, inside the objective."""
    if poly_a.degree != poly_b.degree:
        raise ValueError("type polynomials come from different bundle sizes")
    c = poly_a.coeffs
    d = inner_integral_coeffs(poly_b.coeffs, spec)
    m = _moments(spec.alpha, spec.beta, len(c) + len(d))
    total = Fraction(0)
    for s, cs in enumerate(c):
        if cs:
            for t, dt in enumerate(d):
                if dt:
                    total += cs * dt * m[s + t]
    return total


@lru_cache(maxsize=32)
def _bilinear_kernel(degree: int, spec: ObjectiveSpec) -> tuple[tuple[int, ...], int]:
    """Integer matrix K and scale Q with ``W(a, b) = c_a^T K c_b / Q``."""
    n = degree + 1
    g, d = spec.gamma, spec.delta
    # inner[t][s]: coefficient of x^t contributed by c_s in the inner integral
    inner = [[Fraction(0)] * n for _ in range(n + 1)]
    for s in range(n):
        inner[0][s] += d ** (s + 1) / (s + 1)
        for i in range(s + 2):
            inner[i][s] -= comb(s + 1, i) * g ** (s + 1 - i) / Fraction(s + 1)
    m = _moments(spec.alpha, spec.beta, 2 * n + 1)
    kern = [[sum((m[s + t] * inner[t][s2] for t in range(n + 1)), Fraction(0)) for s2 in range(n)] for s in range(n)]
    q = math.lcm(*(x.denominator for row in kern for x in row))
    return tuple(tuple(int(x * q) for x in row) for row in kern), q


@dataclass
class WeightMatrix:
    """``W[i][j] = numerators[i, j] / denominator`` over canonical type indices."""

    k: int
    noise_label: str
    noise_digest: str
    objective: ObjectiveSpec
    numerators: np.ndarray  # object dtype, Python ints
    denominator: int

    @property
    def types(self) -> tuple[RankType, ...]:
        return enumerate_types(self.k)

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        if not isinstance(i, int):
            i = self.types.index(RankType(i))
        if not isinstance(j, int):
            j = self.types.index(RankType(j))
        return Fraction(int(self.numerators[i, j]), self.denominator)

    def total(self) -> Fraction:
        return Fraction(int(self.numerators.sum()), self.denominator)

    def mass(self) -> Fraction:
        return objective_mass(self.objective)

    def to_float(self) -> np.ndarray:
        scale = self.denominator
        return np.array([[int(x) / scale for x in row] for row in self.numerators], dtype=float)

    # ---- cache file: JSON header + rows of "num/den" strings (reduced per entry)
    def to_json(self) -> dict:
        return {
            "k": self.k,
            "noise_label": self.noise_label,
            "noise_digest": self.noise_digest,
            "objective": self.objective.to_json(),
            "rows": [[_frac_str(int(x), self.denominator) for x in row] for row in self.numerators],
        }

    @classmethod
    def from_json(cls, data: dict) -> "WeightMatrix":
        rows = [[Fraction(x) for x in row] for row in data["rows"]]
        den = math.lcm(*(x.denominator for row in rows for x in row))
        nums = np.empty((len(rows), len(rows)), dtype=object)
        for i, row in enumerate(rows):
            for j, x in enumerate(row):
                nums[i, j] = x.numerator * (den // x.denominator)
        obj = data["objective"]
        spec = ObjectiveSpec(obj["name"], *(Fraction(x) for x in obj["tuple"]))
        return cls(data["k"], data["noise_label"], data["noise_digest"], spec, nums, den)


def _frac_str(num: int, den: int) -> str:
    g = math.gcd(num, den)
    return f"{num // g}/{den // g}"


def weight_matrix(k: int, matrix: NoiseMatrix, spec: ObjectiveSpec) -> WeightMatrix:
    """All ``|T_k|^2`` weights at once via the bilinear form ``C^T K C``."""
    polys = all_type_polynomials(k, matrix)
    den = math.lcm(*(p.denominator for p in polys))
    cmat = np.empty((k * k - k + 1, len(polys)), dtype=object)
    for col, p in enumerate(polys):
        scale = den // p.denominator
        for s, c in enumerate(p.numerators):
            cmat[s, col] = c * scale
    kern, q = _bilinear_kernel(k * k - k, spec)
    kmat = np.array(kern, dtype=object).reshape(k * k - k + 1, k * k - k + 1)
    nums = cmat.T.dot(kmat.dot(cmat))
    denominator = den * den * q
    g = math.gcd(denominator, *(int(x) for x in nums.flat))
    if g > 1:
        nums = nums // g
        denominator //= g
    return WeightMatrix(k, matrix.label, matrix.digest(), spec, nums, denominator)


# --------------------------------------------------------------------------- performance

def rule_levels(rule, k: int) -> np.ndarray:
    """Level of every type (canonical index order); lower is better, equal means tied.

    ``rule`` is a :class:`TypeOrdering` (strict) or ``"borda"``: types ranked by
    Borda score with equal scores tied, i.e. papers of equal score are ordered
    uniformly at random.
    """
    if isinstance(rule, TypeOrdering):
        if rule.k != k:
            raise ValueError(f"ordering is for k={rule.k}, weights for k={k}")
        return rule.positions()
    if rule == "borda":
        return np.array([-borda_score(t) for t in enumerate_types(k)], dtype=np.int64)
    raise ValueError(f"unknown rule {rule!r}")


def raw_performance(rule, weights: WeightMatrix) -> Fraction:
    """Sum of W over correctly ordered type pairs plus half of every tied pair."""
    levels = rule_levels(rule, weights.k)
    ahead = levels[:, None] < levels[None, :]
    tied = levels[:, None] == levels[None, :]
    num = 2 * int(weights.numerators[ahead].sum()) + int(weights.numerators[tied].sum())
    return Fraction(num, 2 * weights.denominator)


def predicted_performance(rule, weights: WeightMatrix) -> Fraction:
    """Expected fraction of qualifying pairs the rule recovers correctly."""
    return raw_performance(rule, weights) / weights.mass()


# --------------------------------------------------------------------------- cache

def cache_path(cache_dir: str | Path, k: int, matrix: NoiseMatrix, spec: ObjectiveSpec) -> Path:
    return Path(cache_dir) / f"w_k{k}_{matrix.label or 'matrix'}_{matrix.digest()}_{spec.key()}.json"


def cached_weight_matrix(
    k: int, matrix: NoiseMatrix, spec: ObjectiveSpec, cache_dir: str | Path | None = None, log=None
) -> WeightMatrix:
    """``weight_matrix`` backed by an on-disk cache keyed by (k, matrix digest, objective)."""
    if cache_dir is None:
        return weight_matrix(k, matrix, spec)
    path = cache_path(cache_dir, k, matrix, spec)
    if path.exists():
        data = json.loads(path.read_text())
        if data.get("noise_digest") == matrix.digest() and data.get("k") == k:
            return WeightMatrix.from_json(data)
        if log:
            log(f"cache {path.name} does not match the noise matrix; recomputing")
    w = weight_matrix(k, matrix, spec)
    write_atomic(path, json.dumps(w.to_json()))
    return w


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
