import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projlim.polynomial import (
    CylinderFunction,
    Polynomial,
    RangeError,
    cylinder,
    evaluate,
    pullback,
    x,
)

monomials = st.lists(st.tuples(st.integers(1, 4), st.integers(0, 3)), max_size=3)
coeffs = st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-3)
polys = st.lists(st.tuples(monomials, coeffs), max_size=5).map(Polynomial)
points = st.lists(st.floats(-2, 2, allow_nan=False), min_size=8, max_size=8).map(np.array)


def test_mul_merges_exponents():
    assert x(1) * x(1) == x(1, 2)


def test_add_cancels_terms():
    assert (x(1) + x(2)) + (-x(2)) == x(1)
    assert ((x(1) + x(2)) - x(2)).terms == {((1, 1),): 1.0}


def test_scale_by_zero_is_empty():
    p = x(1).scale(0)
    assert p.is_zero() and p.terms == {}


def test_canonical_order_and_json_roundtrip():
    p = Polynomial.monomial([0, 1], 2.0) + Polynomial.monomial([1, 0], 3.0) + Polynomial.constant(1)
    records = p.to_json()
    assert [r["exponents"] for r in records] == [[0, 0], [0, 1], [1, 0]]
    again = Polynomial.from_json(json.loads(json.dumps(records)))
    assert again == p
    assert json.dumps(again.to_json()) == json.dumps(records)


def test_zero_coefficients_are_dropped():
    p = Polynomial([(((1, 1),), 0.0), (((2, 1),), 1.0)])
    assert len(p) == 1
    assert p.support_level == 2


@pytest.mark.parametrize(
    "f, point, expected",
    [
        (cylinder(x(1) + x(2)), [1, 2], 3.0),
        (CylinderFunction(exponent=x(1, 2)), [0.0], 1.0),
        (cylinder(Polynomial.monomial([3], 2.0)), [2.0], 16.0),
    ],
)
def test_evaluate_examples(f, point, expected):
    assert evaluate(f, point) == expected


def test_evaluate_overflow_is_range_error():
    f = CylinderFunction(exponent=-x(1, 2))
    with pytest.raises(RangeError):
        evaluate(f, [40.0])


def test_evaluate_rejects_short_points():
    with pytest.raises(ValueError):
        evaluate(cylinder(x(3)), [1.0, 2.0])


def test_pullback_examples():
    f = cylinder(x(1, 2))
    g = pullback(f, 3)
    assert g.level == 3 and g.poly == f.poly
    one = pullback(cylinder(Polynomial.constant(1.0)), 5)
    assert one.level == 5 and one.poly == Polynomial.constant(1.0)
    h = cylinder(x(1) * x(2))
    assert pullback(h, 2) is h
    with pytest.raises(ValueError):
        pullback(g, 2)


def test_level_is_recomputed_not_trusted():
    with pytest.raises(ValueError):
        CylinderFunction(x(3), level=2)
    assert CylinderFunction(x(3)).level == 3
    assert CylinderFunction(Polynomial.constant(2.0)).level == 1


@settings(max_examples=60, deadline=None)
@given(polys, points, st.integers(0, 3))
def test_pullback_preserves_values(p, pt, extra):
    f = cylinder(p)
    g = pullback(f, f.level + extra)
    assert evaluate(g, pt[: g.level]) == evaluate(f, pt[: f.level])


@settings(max_examples=60, deadline=None)
@given(polys, polys, points, coeffs)
def test_evaluation_is_an_algebra_homomorphism(p, q, pt, a):
    scale = 1 + abs(p(pt)) * (1 + abs(q(pt)))
    assert math.isclose((p + q)(pt), p(pt) + q(pt), rel_tol=1e-12, abs_tol=1e-12 * scale)
    assert math.isclose((p * q)(pt), p(pt) * q(pt), rel_tol=1e-10, abs_tol=1e-10 * scale)
    assert math.isclose(p.scale(a)(pt), a * p(pt), rel_tol=1e-12, abs_tol=1e-12 * scale)


@settings(max_examples=60, deadline=None)
@given(polys)
def test_level_minimality(p):
    top = max((c for mono in p.terms for c, _ in mono), default=0)
    assert p.support_level == top
    assert cylinder(p).level == max(top, 1)


def test_power_matches_repeated_product():
    p = x(1) + 2 * x(2) - 1
    assert (p ** 3).allclose(p * p * p)
    assert p ** 0 == Polynomial.constant(1.0)


def test_substitute():
    p = x(1) * x(2, 2)
    q = p.substitute({2: x(1) + 1})
    assert q.allclose(x(1, 3) + 2 * x(1, 2) + x(1))


def test_bounded_below_check():
    assert (x(1, 4) + x(2, 4) - 3 * x(1, 2)).min_top_degree_check()
    assert not (-x(1, 4)).min_top_degree_check()
    assert not x(1, 3).min_top_degree_check()


def test_cylinder_json_roundtrip():
    f = CylinderFunction(x(1) * x(2), x(1, 4), level=3)
    assert CylinderFunction.from_json(f.to_json()) == f
