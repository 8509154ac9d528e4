import itertools
import math

import numpy as np
import pytest

from projlim.discrete import (
    FiniteProductSystem,
    TableFunction,
    brute_force_integral,
    discrete_conditional_expectation,
    discrete_lp_norm,
    verify_tower,
)
from projlim.errors import EnumerationGuardError
from projlim.polynomial import Polynomial, cylinder, x

FAIR = FiniteProductSystem.coins(3)
BIASED = FiniteProductSystem.coins(3, p=0.3)


def enumerate_integral(f, system, n):
    """Plain loop over outcomes, independent of the array code."""
    total = 0.0
    for outcome in itertools.product(*(range(k) for k in system.alphabet_sizes[:n])):
        w = math.prod(system.weights[i][o] for i, o in enumerate(outcome))
        total += w * f(np.array(outcome, dtype=float))
    return total


def random_system(rng, coords=4, max_alpha=4):
    sizes = [int(rng.integers(2, max_alpha + 1)) for _ in range(coords)]
    weights = []
    for k in sizes:
        w = rng.dirichlet(np.ones(k))
        w[-1] = 1.0 - math.fsum(w[:-1])
        weights.append(w)
    return FiniteProductSystem(sizes, weights)


def test_fair_coin_sum():
    assert brute_force_integral(cylinder(x(1) + x(2)), FAIR, 2) == 1.0


def test_constant_integrates_to_one():
    assert brute_force_integral(cylinder(Polynomial.constant(1.0)), FAIR, 3) == 1.0
    assert brute_force_integral(cylinder(Polynomial.constant(1.0)), BIASED, 3) == pytest.approx(1.0, abs=1e-15)


def test_biased_coin_first_coordinate():
    assert brute_force_integral(cylinder(x(1)), BIASED, 1) == pytest.approx(0.3, abs=1e-15)


def test_matches_loop_enumeration(rng):
    system = random_system(rng)
    f = x(1) * x(2) + x(3, 2) - 0.5 * x(4)
    assert brute_force_integral(cylinder(f), system, 4) == pytest.approx(
        enumerate_integral(f, system, 4), abs=1e-13)


def test_conditional_expectation_examples():
    g = discrete_conditional_expectation(cylinder(x(1) + x(2)), 1, FAIR)
    assert g.level == 1
    assert np.array_equal(g.table, [0.5, 1.5])

    f = cylinder(x(1, 2) + 1)
    same = discrete_conditional_expectation(f, 1, FAIR)
    assert np.array_equal(same.table, FAIR.table(f, 1))

    h = discrete_conditional_expectation(cylinder(x(1) * x(2)), 1, BIASED)
    assert np.allclose(h.table, [0.0, 0.3], atol=1e-15, rtol=0)


def test_tower_examples():
    f = cylinder(x(1) + x(2) + x(3))
    assert verify_tower(f, FAIR, 1, 2)
    inner = discrete_conditional_expectation(f, 2, FAIR)
    assert np.array_equal(discrete_conditional_expectation(inner, 1, FAIR).table, [1.0, 2.0])
    assert verify_tower(f, FAIR, 2, 2)


def test_tower_random_polynomials(rng):
    for _ in range(10):
        coeffs = rng.uniform(-1, 1, size=6)
        f = cylinder(coeffs[0] + coeffs[1] * x(1) * x(3) + coeffs[2] * x(2, 2)
                     + coeffs[3] * x(1) * x(2) * x(3) + coeffs[4] * x(3, 3) + coeffs[5] * x(2))
        assert verify_tower(f, FAIR, 1, 2)


def test_stabilisation_of_brute_force_integral(rng):
    system = random_system(rng, coords=6, max_alpha=3)
    f = cylinder(x(1) * x(2) + x(2, 3))
    values = [brute_force_integral(f, system, n) for n in range(2, 7)]
    assert max(values) - min(values) <= 1e-14


def test_projection_contracts_and_fixes_measurable(rng):
    system = random_system(rng)
    f = TableFunction(rng.uniform(-1, 1, size=system.alphabet_sizes))
    for n in range(1, 4):
        e = discrete_conditional_expectation(f, n, system)
        assert discrete_lp_norm(e, system, 4) <= discrete_lp_norm(f, system, 4) + 1e-14
        assert discrete_lp_norm(e, system, 4) < discrete_lp_norm(f, system, 4) - 1e-6
    g = discrete_conditional_expectation(f, 2, system)
    assert discrete_lp_norm(discrete_conditional_expectation(g, 2, system), system, 4) == pytest.approx(
        discrete_lp_norm(g, system, 4), abs=1e-14)


def test_pullback_isometry(rng):
    system = random_system(rng)
    f = TableFunction(rng.uniform(-1, 1, size=system.alphabet_sizes[:2]))
    base = discrete_lp_norm(f, system, 2, p=3)
    for m in (3, 4):
        assert discrete_lp_norm(f, system, m, p=3) == pytest.approx(base, abs=1e-14)


def test_guard():
    big = FiniteProductSystem.coins(25)
    with pytest.raises(EnumerationGuardError):
        brute_force_integral(cylinder(x(1)), big, 25)
    with pytest.raises(EnumerationGuardError):
        discrete_conditional_expectation(cylinder(x(25)), 1, big)


def test_weights_validated():
    with pytest.raises(ValueError):
        FiniteProductSystem([2], [[0.5, 0.6]])
    with pytest.raises(ValueError):
        FiniteProductSystem([1], [[1.0]])
