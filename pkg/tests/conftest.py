import itertools
import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from projlim.gaussian import CovarianceKernel
from projlim.polynomial import Polynomial

ACCEPTANCE_LINES = []


def random_spd(dim, rng, ridge=0.3):
    A = rng.standard_normal((dim, dim))
    C = A @ A.T / dim + ridge * np.eye(dim)
    d = np.sqrt(np.diag(C))
    return C / np.outer(d, d)


def random_spd_kernel(dim, rng):
    return CovarianceKernel.from_matrix(random_spd(dim, rng))


def random_polynomial(rng, level, degree, nterms=5):
    """Random polynomial whose support level is exactly ``level``."""
    terms = {}
    for _ in range(nterms):
        total = int(rng.integers(0, degree + 1))
        exps = [0] * level
        for _ in range(total):
            exps[int(rng.integers(0, level))] += 1
        terms[tuple(exps)] = rng.uniform(-1, 1)
    top = [0] * level
    top[-1] = int(rng.integers(1, degree + 1))
    terms[tuple(top)] = rng.uniform(0.5, 1.0)
    return Polynomial([(tuple((i + 1, e) for i, e in enumerate(k)), c) for k, c in terms.items()])


def gauss_hermite_expectation(func, C, nodes=8):
    """E[func(x)] for x ~ N(0, C) by tensor Gauss-Hermite quadrature.

    Exact for polynomials of degree <= 2 * nodes - 1.
    """
    C = np.atleast_2d(C)
    dim = C.shape[0]
    L = np.linalg.cholesky(C)
    z1, w1 = hermegauss(nodes)
    w1 = w1 / math.sqrt(2 * math.pi)
    Z = np.array(list(itertools.product(z1, repeat=dim)))
    W = np.prod(np.array(list(itertools.product(w1, repeat=dim))), axis=1)
    X = Z @ L.T
    return float(np.sum(W * func(X)))


def all_pairings(items):
    items = list(items)
    if not items:
        yield []
        return
    first = items.pop(0)
    for i, other in enumerate(items):
        for rest in all_pairings(items[:i] + items[i + 1:]):
            yield [(first, other)] + rest


def brute_force_moment(exponents, C):
    """Sum over every perfect matching of the expanded index list."""
    idx = [i for i, k in enumerate(exponents) for _ in range(k)]
    if len(idx) % 2:
        return 0.0
    return sum(math.prod(C[a, b] for a, b in pairing) for pairing in all_pairings(idx))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
