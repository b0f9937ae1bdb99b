import pytest

from peergrade.reproduce import Context


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("weights"))


@pytest.fixture(scope="session")
def ctx(cache_dir):
    """Shared weight cache and memoized optimizations for the slow k=6 tests."""
    return Context(cache_dir=cache_dir)


def random_balanced(k, seed, terms=4):
    """Exactly doubly stochastic matrix: a random rational mix of permutation matrices."""
    from fractions import Fraction

    import numpy as np

    from peergrade.noise import NoiseMatrix

    rng = np.random.default_rng(seed)
    w = [int(x) for x in rng.integers(1, 20, terms)]
    rows = [[Fraction(0)] * k for _ in range(k)]
    for weight in w:
        for j, i in enumerate(rng.permutation(k)):
            rows[i][j] += Fraction(weight, sum(w))
    return NoiseMatrix(tuple(map(tuple, rows)), f"random{k}-{seed}")
