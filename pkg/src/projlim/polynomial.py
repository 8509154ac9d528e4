"""Sparse multivariate polynomials and cylinder functions.

A monomial is stored as a tuple of ``(coordinate, power)`` pairs sorted by
coordinate, with 1-based coordinates (``x1, x2, ...``).  The empty tuple is the
constant monomial.  Coefficients are Python floats; zero coefficients are never
stored, so two polynomials are equal exactly when their term maps are.

A :class:`CylinderFunction` is a function of finitely many coordinates.  Its
body is either a polynomial ``P``, an exponential ``exp(-Q)`` or the product
``P * exp(-Q)``.  The *level* is the chain level the function is viewed at; it
can only be raised (by :func:`pullback`), never lowered below the largest
coordinate the body refers to.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Optional, Union

import numpy as np

from .errors import ProjlimError

Monomial = tuple  # tuple[tuple[int, int], ...]


class RangeError(ProjlimError, ArithmeticError):
    """Evaluation overflowed to a non-finite value."""


def _canon_monomial(pairs: Iterable) -> Monomial:
    acc: dict[int, int] = {}
    for coord, power in pairs:
        coord, power = int(coord), int(power)
        if coord < 1:
            raise ValueError(f"coordinates are 1-based, got {coord}")
        if power < 0:
            raise ValueError(f"negative exponent {power} on x{coord}")
        if power:
            acc[coord] = acc.get(coord, 0) + power
    return tuple(sorted(acc.items()))


def monomial_from_exponents(exponents: Sequence[int]) -> Monomial:
    """Dense exponent vector (index 0 is ``x1``) to a sparse monomial key."""
    return _canon_monomial((i + 1, e) for i, e in enumerate(exponents))


def monomial_to_exponents(mono: Monomial, length: Optional[int] = None) -> list:
    top = mono[-1][0] if mono else 0
    length = top if length is None else length
    if length < top:
        raise ValueError("length shorter than the monomial support")
    dense = [0] * length
    for coord, power in mono:
        dense[coord - 1] = power
    return dense


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    return _canon_monomial(a + b)


class Polynomial:
    """Immutable sparse polynomial in the coordinates ``x1, x2, ...``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Union[Mapping, Iterable, None] = None):
        acc: dict[Monomial, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for mono, coeff in items:
            key = _canon_monomial(mono)
            acc[key] = acc.get(key, 0.0) + float(coeff)
        self._terms = {k: c for k, c in acc.items() if c != 0.0}
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "Polynomial":
        obj = cls.__new__(cls)
        obj._terms = {k: c for k, c in terms.items() if c != 0.0}
        obj._hash = None
        return obj

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls._raw({(): float(value)})

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls._raw({})

    @classmethod
    def variable(cls, coord: int, power: int = 1) -> "Polynomial":
        return cls._raw({_canon_monomial([(coord, power)]): 1.0})

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls._raw({monomial_from_exponents(exponents): float(coeff)})

    @classmethod
    def linear(cls, coeffs: Sequence[float]) -> "Polynomial":
        """``sum_i coeffs[i] * x_{i+1}``."""
        return cls._raw({((i + 1, 1),): float(c) for i, c in enumerate(coeffs)})

    # -- inspection ----------------------------------------------------------
    @property
    def terms(self) -> Mapping:
        return dict(self._terms)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def coefficient(self, exponents: Sequence[int]) -> float:
        return self._terms.get(monomial_from_exponents(exponents), 0.0)

    @property
    def support_level(self) -> int:
        """Largest coordinate with a nonzero exponent (0 for constants)."""
        return max((m[-1][0] for m in self._terms if m), default=0)

    @property
    def degree(self) -> int:
        return max((sum(p for _, p in m) for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_term(self) -> float:
        return self._terms.get((), 0.0)

    def sorted_terms(self) -> list:
        """Terms in lexicographic order of their dense exponent vectors."""
        width = self.support_level
        return sorted(self._terms.items(), key=lambda kv: monomial_to_exponents(kv[0], width))

    def min_top_degree_check(self) -> bool:
        """True if the polynomial is bounded below by a crude sufficient test.

        The highest total degree must be even and every pure power ``x_i^k`` of
        that degree must carry a positive coefficient, with no other monomial
        of top degree.  This is enough for ``exp(-P)`` to be integrable against
        a Gaussian; mixed top-degree terms are rejected conservatively.
        """
        if self.is_constant():
            return True
        top = self.degree
        if top % 2:
            return False
        top_terms = [(m, c) for m, c in self._terms.items() if sum(p for _, p in m) == top]
        return all(len(m) == 1 and c > 0 for m, c in top_terms)

    # -- algebra -------------------------------------------------------------
    def __add__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: float) -> "Polynomial":
        factor = float(factor)
        if factor == 0.0:
            return Polynomial.zero()
        return Polynomial._raw({m: c * factor for m, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        out: dict[Monomial, float] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = _mono_mul(ma, mb)
                out[m] = out.get(m, 0.0) + ca * cb
        return Polynomial._raw(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.constant(1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def substitute(self, mapping: Mapping) -> "Polynomial":
        """Replace ``x_c`` by ``mapping[c]`` (a Polynomial) for each key ``c``."""
        powers: dict = {}

        def power_of(coord, k):
            key = (coord, k)
            if key not in powers:
                powers[key] = mapping[coord] ** k
            return powers[key]

        result = Polynomial.zero()
        for mono, coeff in self._terms.items():
            kept = []
            term = Polynomial.constant(coeff)
            for coord, k in mono:
                if coord in mapping:
                    term = term * power_of(coord, k)
                else:
                    kept.append((coord, k))
            if kept:
                term = term * Polynomial._raw({tuple(kept): 1.0})
            result = result + term
        return result

    # -- evaluation ----------------------------------------------------------
    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate at a point (1-D) or at each row of a 2-D array."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = arr[None, :] if single else arr
        if pts.shape[1] < self.support_level:
            raise ValueError(
                f"point has {pts.shape[1]} coordinates, polynomial needs {self.support_level}"
            )
        out = np.zeros(pts.shape[0])
        cache: dict = {}
        with np.errstate(over="ignore", invalid="ignore"):
            for mono, coeff in self._terms.items():
                val = np.full(pts.shape[0], coeff)
                for coord, k in mono:
                    key = (coord, k)
                    if key not in cache:
                        cache[key] = pts[:, coord - 1] ** k
                    val = val * cache[key]
                out += val
        return float(out[0]) if single else out

    # -- comparison / serialization -------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= atol for k in keys)

    def max_coefficient_gap(self, other: "Polynomial") -> float:
        keys = set(self._terms) | set(other._terms)
        return max((abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) for k in keys), default=0.0)

    def to_json(self) -> list:
        width = self.support_level
        return [
            {"coeff": c, "exponents": monomial_to_exponents(m, width)}
            for m, c in self.sorted_terms()
        ]

    @classmethod
    def from_json(cls, records: Iterable) -> "Polynomial":
        terms = []
        for rec in records:
            terms.append((monomial_from_exponents(rec["exponents"]), rec["coeff"]))
        return cls(terms)

    def __repr__(self):
        if not self._terms:
            return "Polynomial(0)"
        parts = []
        for mono, c in self.sorted_terms():
            factors = "*".join(f"x{i}" if k == 1 else f"x{i}^{k}" for i, k in mono)
            parts.append(f"{c:g}" + (f"*{factors}" if factors else ""))
        return "Polynomial(" + " + ".join(parts) + ")"


def _as_poly(obj):
    if isinstance(obj, Polynomial):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return Polynomial.constant(float(obj))
    return NotImplemented


def x(coord: int, power: int = 1) -> Polynomial:
    """Shorthand for the coordinate polynomial ``x_coord ** power``."""
    return Polynomial.variable(coord, power)


class CylinderFunction:
    """``poly(x) * exp(-exponent(x))`` viewed at a fixed chain level.

    Either part may be omitted (``poly=None`` means 1, ``exponent=None``
    means 0).  ``level`` defaults to the support level (at least 1).
    """

    __slots__ = ("poly", "exponent", "level")

    def __init__(self, poly=None, exponent=None, level: Optional[int] = None):
        if poly is None and exponent is None:
            raise ValueError("a cylinder function needs a polynomial or an exponent")
        if poly is not None and not isinstance(poly, Polynomial):
            poly = _as_poly(poly)
            if poly is NotImplemented:
                raise TypeError("poly must be a Polynomial or a number")
        if exponent is not None and not isinstance(exponent, Polynomial):
            raise TypeError("exponent must be a Polynomial")
        support = max(
            poly.support_level if poly is not None else 0,
            exponent.support_level if exponent is not None else 0,
        )
        if level is None:
            level = max(support, 1)
        level = int(level)
        if level < 1:
            raise ValueError("levels start at 1")
        if level < support:
            raise ValueError(f"level {level} below the support level {support}")
        self.poly = poly
        self.exponent = exponent
        self.level = level

    @property
    def support_level(self) -> int:
        return max(
            self.poly.support_level if self.poly is not None else 0,
            self.exponent.support_level if self.exponent is not None else 0,
        )

    @property
    def kind(self) -> str:
        if self.exponent is None:
            return "polynomial"
        return "exp" if self.poly is None else "product"

    @property
    def is_polynomial(self) -> bool:
        return self.exponent is None or self.exponent.is_zero()

    def polynomial(self) -> Polynomial:
        """The body as a polynomial; only valid when :attr:`is_polynomial`."""
        if not self.is_polynomial:
            raise TypeError("cylinder function has an exponential factor")
        return self.poly if self.poly is not None else Polynomial.constant(1.0)

    def is_constant(self) -> bool:
        return (self.poly is None or self.poly.is_constant()) and (
            self.exponent is None or self.exponent.is_constant()
        )

    def constant_value(self) -> float:
        c = self.poly.constant_term() if self.poly is not None else 1.0
        if self.exponent is not None:
            c *= math.exp(-self.exponent.constant_term())
        return c

    def evaluate_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2:
            raise ValueError("expected a 2-D array of points")
        if pts.shape[1] < self.support_level:
            raise ValueError(f"points have {pts.shape[1]} coordinates, need {self.support_level}")
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.ones(pts.shape[0]) if self.poly is None else self.poly.evaluate(pts)
            if self.exponent is not None:
                out = out * np.exp(-self.exponent.evaluate(pts))
        return out

    def __call__(self, point):
        return evaluate(self, point)

    def _combine(self, other, op):
        if isinstance(other, (int, float, Polynomial)):
            other = CylinderFunction(_as_poly(other), level=self.level)
        if not isinstance(other, CylinderFunction):
            return NotImplemented
        level = max(self.level, other.level)
        if op == "mul":
            poly = None
            if self.poly is not None or other.poly is not None:
                poly = (self.poly if self.poly is not None else Polynomial.constant(1.0)) * (
                    other.poly if other.poly is not None else Polynomial.constant(1.0)
                )
            exponent = None
            if self.exponent is not None or other.exponent is not None:
                exponent = (self.exponent or Polynomial.zero()) + (other.exponent or Polynomial.zero())
            return CylinderFunction(poly, exponent, level)
        if not (self.is_polynomial and other.is_polynomial):
            if self.exponent == other.exponent:
                a = self.poly if self.poly is not None else Polynomial.constant(1.0)
                b = other.poly if other.poly is not None else Polynomial.constant(1.0)
                return CylinderFunction(a + b if op == "add" else a - b, self.exponent, level)
            raise TypeError("sum of cylinder functions with different exponentials")
        a, b = self.polynomial(), other.polynomial()
        return CylinderFunction(a + b if op == "add" else a - b, level=level)

    def __add__(self, other):
        return self._combine(other, "add")

    def __sub__(self, other):
        return self._combine(other, "sub")

    def __mul__(self, other):
        return self._combine(other, "mul")

    __radd__ = __add__
    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, CylinderFunction):
            return NotImplemented
        return (self.level, self.poly, self.exponent) == (other.level, other.poly, other.exponent)

    def __hash__(self):
        return hash((self.level, self.poly, self.exponent))

    def __repr__(self):
        parts = []
        if self.poly is not None:
            parts.append(repr(self.poly))
        if self.exponent is not None:
            parts.append(f"exp(-{self.exponent!r})")
        return f"CylinderFunction({' * '.join(parts)}, level={self.level})"

    def to_json(self) -> dict:
        out: dict = {"level": self.level}
        if self.poly is not None:
            out["polynomial"] = self.poly.to_json()
        if self.exponent is not None:
            out["exp_polynomial"] = self.exponent.to_json()
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "CylinderFunction":
        poly = Polynomial.from_json(data["polynomial"]) if "polynomial" in data else None
        exponent = Polynomial.from_json(data["exp_polynomial"]) if "exp_polynomial" in data else None
        return cls(poly, exponent, data.get("level"))


def cylinder(poly, level: Optional[int] = None) -> CylinderFunction:
    return CylinderFunction(_as_poly(poly) if not isinstance(poly, Polynomial) else poly, level=level)


def pullback(f: CylinderFunction, m: int) -> CylinderFunction:
    """View ``f`` at level ``m >= f.level``; the body is untouched."""
    if m < f.level:
        raise ValueError(f"cannot pull back a level-{f.level} function to level {m}")
    if m == f.level:
        return f
    return CylinderFunction(f.poly, f.exponent, m)


def evaluate(f: CylinderFunction, point) -> float:
    pt = np.asarray(point, dtype=float)
    if pt.ndim != 1:
        raise ValueError("evaluate expects a single point")
    if len(pt) < f.level:
        raise ValueError(f"point has {len(pt)} coordinates, function lives at level {f.level}")
    if not np.all(np.isfinite(pt)):
        raise ValueError("point has non-finite entries")
    val = float(f.evaluate_batch(pt[None, :])[0])
    if not math.isfinite(val):
        raise RangeError(f"evaluation overflowed at {pt.tolist()}")
    return val
