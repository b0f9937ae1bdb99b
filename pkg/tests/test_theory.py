import json
from fractions import Fraction
from math import comb

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import random_balanced
from peergrade.noise import builtin_matrix, identity, validate_and_balance
from peergrade.theory import (
    STANDARD_OBJECTIVES, ObjectiveSpec, WeightMatrix, all_type_polynomials, cache_path, cached_weight_matrix,
    objective_mass, parse_objective, predicted_performance, raw_performance, type_polynomial,
    type_polynomial_loops, weight, weight_matrix,
)
from peergrade.typespace import RankType, borda_ordering, borda_score, enumerate_types, multiplicity

x = sympy.symbols("x")
BUILTINS = ["mallows6", "real6", "real6-printed", "p100", "p1000"]


def as_sympy(poly):
    return sum(sympy.Rational(c.numerator, c.denominator) * x**s for s, c in enumerate(poly.coeffs))


# ---- objectives

@pytest.mark.parametrize("name,mass", [
    ("all2all", Fraction(1, 2)),
    ("th-10%", Fraction(19, 200)),
    ("acc-2%", Fraction(2401, 5000)),
    ("th-50%", Fraction(3, 8)),
    ("acc-5%", Fraction(361, 800)),
])
def test_masses(name, mass):
    assert objective_mass(parse_objective(name)) == mass


def test_objective_tuples():
    assert parse_objective("th-10%").tuple() == (0, Fraction(1, 10), 0, 1)
    assert parse_objective("acc-2%").tuple() == (0, Fraction(49, 50), Fraction(1, 50), 1)
    assert parse_objective("custom:0,1/2,1/4,1").tuple() == (0, Fraction(1, 2), Fraction(1, 4), 1)


@pytest.mark.parametrize("bad", ["th", "foo", "custom:0,1", "custom:0,1,1/2,1", "custom:1/2,1/2,0,1"])
def test_bad_objectives(bad):
    with pytest.raises(ValueError):
        parse_objective(bad)


def test_mass_matches_integral():
    spec = parse_objective("custom:1/10,1/2,1/5,9/10")
    expected = sympy.integrate(sympy.Rational(9, 10) - sympy.Rational(1, 5) - x, (x, sympy.Rational(1, 10), sympy.Rational(1, 2)))
    assert objective_mass(spec) == Fraction(str(expected))


# ---- type polynomials

def test_all_first_places_identity():
    p = type_polynomial((1,) * 6, identity(6))
    assert sympy.expand(as_sympy(p) - (1 - x) ** 30) == 0


@pytest.mark.parametrize("k", [2, 3, 4, 6])
def test_identity_closed_form(k):
    for sigma in enumerate_types(k):
        b = borda_score(sigma)
        lead = multiplicity(sigma)
        for s in sigma:
            lead *= comb(k - 1, s - 1)
        expected = lead * x ** (k * k - b) * (1 - x) ** (b - k)
        assert sympy.expand(as_sympy(type_polynomial(sigma, identity(k))) - expected) == 0


@pytest.mark.parametrize("name", BUILTINS)
def test_value_at_zero(name):
    m = validate_and_balance(builtin_matrix(name))
    for sigma in enumerate_types(6)[::37]:
        expected = multiplicity(sigma)
        for s in sigma:
            expected *= m[s - 1, 0]
        assert type_polynomial(sigma, m)(0) == expected


@pytest.mark.parametrize("name", BUILTINS + ["identity6"])
def test_normalization_builtin(name):
    m = validate_and_balance(builtin_matrix(name))
    total = [Fraction(0)] * 31
    for p in all_type_polynomials(6, m):
        assert p.degree <= 30
        for s, c in enumerate(p.coeffs):
            total[s] += c
    assert total == [1] + [0] * 30


@pytest.mark.parametrize("k", range(1, 7))
def test_normalization_small_k(k):
    for m in (identity(k), random_balanced(k, k)):
        total = sum((np.array(p.coeffs, dtype=object) for p in all_type_polynomials(k, m)), np.zeros(k * k - k + 1, dtype=object))
        assert list(total) == [1] + [0] * (k * k - k)


@pytest.mark.parametrize("k,seed", [(1, 0), (2, 1), (3, 2), (3, 3)])
def test_loop_nest_oracle(k, seed):
    m = random_balanced(k, seed)
    for sigma in enumerate_types(k):
        assert type_polynomial(sigma, m).coeffs == type_polynomial_loops(sigma, m).coeffs


def test_probabilities_in_unit_interval():
    m = builtin_matrix("real6")
    for sigma in enumerate_types(6)[::11]:
        p = type_polynomial(sigma, m)
        for t in np.linspace(0, 1, 13):
            assert 0 <= p(Fraction(t).limit_denominator(1000)) <= 1


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        type_polynomial((1, 1, 2), identity(4))


# ---- weights

def test_two_by_two_diagonal():
    # symbolic oracle, computed independently of the package
    inner = sympy.integrate((1 - sympy.Symbol("y")) ** 2, (sympy.Symbol("y"), x, 1))
    exact = sympy.integrate((1 - x) ** 2 * inner, (x, 0, 1))
    assert exact == sympy.Rational(1, 18)
    w = weight_matrix(2, identity(2), parse_objective("all2all"))
    assert w[(1, 1), (1, 1)] == Fraction(1, 18)
    assert w.numerators.shape == (3, 3)


@pytest.mark.parametrize("objective", STANDARD_OBJECTIVES + ("custom:1/10,1/2,1/5,9/10",))
@pytest.mark.parametrize("k,seed", [(2, 0), (3, 1), (4, 2)])
def test_routes_agree(objective, k, seed):
    spec = parse_objective(objective)
    m = random_balanced(k, seed)
    polys = all_type_polynomials(k, m)
    w = weight_matrix(k, m, spec)
    for i, a in enumerate(polys):
        for j, b in enumerate(polys):
            assert weight(a, b, spec) == w[i, j]


@pytest.mark.parametrize("name", ["mallows6", "real6", "identity6"])
@pytest.mark.parametrize("objective", STANDARD_OBJECTIVES)
def test_weight_total_is_mass(name, objective, cache_dir):
    spec = parse_objective(objective)
    m = builtin_matrix(name)
    w = cached_weight_matrix(6, m, spec, cache_dir)
    assert w.total() == objective_mass(spec)
    assert all(v >= 0 for v in w.numerators.ravel())


def _quadrature(pa, pb, spec):
    a, b, g, d = (float(v) for v in spec.tuple())
    val, _ = integrate.dblquad(lambda y, t: pa(t) * pb(y), a, b, lambda t: t + g, lambda t: d,
                               epsabs=1e-10, epsrel=1e-10)
    return val


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_quadrature_agreement():
    rng = np.random.default_rng(2024)
    polys = {name: all_type_polynomials(6, builtin_matrix(name)) for name in ("mallows6", "real6")}
    specs = [parse_objective(o) for o in STANDARD_OBJECTIVES]
    for _ in range(100):
        name = ("mallows6", "real6")[rng.integers(2)]
        spec = specs[rng.integers(len(specs))]
        i, j = rng.integers(462, size=2)
        pa, pb = polys[name][i], polys[name][j]
        fa = np.polynomial.Polynomial([float(c) for c in pa.coeffs])
        fb = np.polynomial.Polynomial([float(c) for c in pb.coeffs])
        assert abs(float(weight(pa, pb, spec)) - _quadrature(fa, fb, spec)) < 1e-6


@pytest.mark.parametrize("k", [2, 3, 4, 5])
@pytest.mark.parametrize("objective", STANDARD_OBJECTIVES)
def test_sign_law_perfect_grading(k, objective):
    w = weight_matrix(k, identity(k), parse_objective(objective))
    types = enumerate_types(k)
    for i, a in enumerate(types):
        for j, b in enumerate(types):
            diff = w.numerators[i, j] - w.numerators[j, i]
            assert np.sign(diff) == np.sign(borda_score(a) - borda_score(b))


# ---- performance

@pytest.mark.parametrize("name,objective,rule,expected", [
    ("identity6", "all2all", "lex", 0.9201),
    ("mallows6", "th-10%", "borda", 0.9052),
    ("real6", "all2all", "borda", 0.7957),
])
def test_published_predictions(name, objective, rule, expected, cache_dir):
    w = cached_weight_matrix(6, builtin_matrix(name), parse_objective(objective), cache_dir)
    r = borda_ordering(6) if rule == "lex" else "borda"
    assert round(float(predicted_performance(r, w)), 4) == expected


def test_reversal_identity(cache_dir):
    w = cached_weight_matrix(6, identity(6), parse_objective("all2all"), cache_dir)
    o = borda_ordering(6)
    # every off-diagonal pair is counted once across the two orderings, the diagonal twice at one half
    off = w.total() - Fraction(int(np.trace(w.numerators)), w.denominator)
    diag = w.total() - off
    assert predicted_performance(o, w) + predicted_performance(o.reversed(), w) == (off + diag) / w.mass() == 1
    assert raw_performance(o, w) == predicted_performance(o, w) * w.mass()


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_tie_break_invariance(seed, cache_dir):
    w = cached_weight_matrix(6, identity(6), parse_objective("acc-5%"), cache_dir)
    base = predicted_performance(borda_ordering(6), w)
    assert predicted_performance(borda_ordering(6, "random", np.random.default_rng(seed)), w) == base
    assert predicted_performance("borda", w) == base


def test_ordering_dimension_check():
    w = weight_matrix(2, identity(2), parse_objective("all2all"))
    with pytest.raises(ValueError):
        predicted_performance(borda_ordering(3), w)


# ---- cache

def test_cache_round_trip(tmp_path):
    m, spec = builtin_matrix("mallows6"), parse_objective("th-50%")
    first = cached_weight_matrix(6, m, spec, tmp_path)
    path = cache_path(tmp_path, 6, m, spec)
    text = path.read_text()
    again = cached_weight_matrix(6, m, spec, tmp_path)
    assert path.read_text() == text
    assert (again.numerators == first.numerators).all() and again.denominator == first.denominator
    row = json.loads(text)["rows"][0][0]
    assert "/" in row or row.lstrip("-").isdigit()


def test_cache_digest_mismatch(tmp_path):
    m, spec = identity(3), parse_objective("all2all")
    cached_weight_matrix(3, m, spec, tmp_path)
    path = cache_path(tmp_path, 3, m, spec)
    data = json.loads(path.read_text())
    data["noise_digest"] = "stale"
    path.write_text(json.dumps(data))
    notes = []
    w = cached_weight_matrix(3, m, spec, tmp_path, log=notes.append)
    assert notes and w.total() == Fraction(1, 2)
    assert json.loads(path.read_text())["noise_digest"] == m.digest()


def test_weight_matrix_json():
    w = weight_matrix(3, random_balanced(3, 9), parse_objective("acc-5%"))
    back = WeightMatrix.from_json(json.loads(json.dumps(w.to_json())))
    assert all(back[i, j] == w[i, j] for i in range(10) for j in range(10))
