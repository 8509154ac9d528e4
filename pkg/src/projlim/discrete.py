"""Finite product systems: exact enumeration oracle for the chain machinery.

Coordinate ``i`` takes the values ``0, 1, ..., alphabet_sizes[i-1] - 1`` with
probabilities ``weights[i-1]``.  Level ``n`` is the product of the first ``n``
coordinates, so every quantity can be computed by summing over all outcomes.
Functions are turned into dense tables indexed by outcome; a
:class:`TableFunction` is such a table kept as a function in its own right.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, EnumerationGuardError
from .polynomial import CylinderFunction, Polynomial

OUTCOME_GUARD = 1 << 24
WEIGHT_TOL = 1e-15
EXACT_TOL = 1e-14


@dataclass(frozen=True)
class DiscreteMarginal:
    probabilities: np.ndarray

    @property
    def n(self) -> int:
        return self.probabilities.ndim


class TableFunction:
    """Function of the first ``level`` coordinates given by a value table."""

    def __init__(self, table):
        table = np.array(table, dtype=float)
        if table.ndim < 1:
            raise ValueError("table functions need at least one coordinate")
        table.setflags(write=False)
        self.table = table

    @property
    def level(self) -> int:
        return self.table.ndim

    def __call__(self, outcome: Sequence[int]) -> float:
        return float(self.table[tuple(int(w) for w in outcome[: self.level])])

    def __repr__(self):
        return f"TableFunction(level={self.level}, shape={self.table.shape})"


DiscreteFunction = Union[CylinderFunction, TableFunction, Polynomial]


class FiniteProductSystem:
    def __init__(self, alphabet_sizes: Sequence[int], weights: Sequence[Sequence[float]]):
        sizes = [int(k) for k in alphabet_sizes]
        if not sizes:
            raise ValueError("need at least one coordinate")
        if len(weights) != len(sizes):
            raise ValueError("one weight vector per coordinate")
        ws = []
        for i, (k, w) in enumerate(zip(sizes, weights), start=1):
            if k < 2:
                raise ValueError(f"coordinate {i}: alphabet size must be >= 2")
            w = np.asarray(w, dtype=float)
            if w.shape != (k,):
                raise ValueError(f"coordinate {i}: expected {k} weights, got {w.shape}")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"coordinate {i}: weights must be finite and non-negative")
            if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
                raise ValueError(f"coordinate {i}: weights sum to {math.fsum(w)!r}, not 1")
            w.setflags(write=False)
            ws.append(w)
        self.alphabet_sizes = tuple(sizes)
        self.weights = tuple(ws)

    @classmethod
    def coins(cls, count: int, p: float = 0.5) -> "FiniteProductSystem":
        """``count`` independent {0, 1} coins with ``P(1) = p``."""
        return cls([2] * count, [[1.0 - p, p]] * count)

    @property
    def max_level(self) -> int:
        return len(self.alphabet_sizes)

    def outcome_count(self, n: int) -> int:
        return math.prod(self.alphabet_sizes[:n])

    def _guard(self, n: int):
        if not 1 <= n <= self.max_level:
            raise ValueError(f"level {n} outside 1..{self.max_level}")
        count = self.outcome_count(n)
        if count > OUTCOME_GUARD:
            raise EnumerationGuardError(f"level {n} has {count} outcomes, guard is {OUTCOME_GUARD}")

    def joint_weights(self, n: int) -> np.ndarray:
        self._guard(n)
        out = self.weights[0]
        for w in self.weights[1:n]:
            out = np.multiply.outer(out, w)
        return np.asarray(out)

    def marginal(self, n: int) -> DiscreteMarginal:
        return DiscreteMarginal(self.joint_weights(n))

    def _grids(self, n: int):
        grids = []
        for axis, k in enumerate(self.alphabet_sizes[:n]):
            shape = [1] * n
            shape[axis] = k
            grids.append(np.arange(k, dtype=float).reshape(shape))
        return grids

    def _poly_table(self, poly: Polynomial, n: int) -> np.ndarray:
        grids = self._grids(n)
        out = np.zeros(self.alphabet_sizes[:n])
        for mono, coeff in poly.sorted_terms():
            term = np.asarray(coeff)
            for coord, power in mono:
                term = term * grids[coord - 1] ** power
            out = out + term
        return out

    def table(self, f: DiscreteFunction, n: int) -> np.ndarray:
        """Values of ``f`` on every level-``n`` outcome."""
        self._guard(n)
        if isinstance(f, Polynomial):
            f = CylinderFunction(f)
        if isinstance(f, TableFunction):
            if f.level > n:
                raise ValueError(f"function lives at level {f.level} > {n}")
            if f.table.shape != self.alphabet_sizes[: f.level]:
                raise DimensionMismatch("table shape does not match the alphabet sizes")
            return np.broadcast_to(f.table.reshape(f.table.shape + (1,) * (n - f.level)),
                                   self.alphabet_sizes[:n]).copy()
        if f.support_level > n:
            raise ValueError(f"function depends on x{f.support_level}, beyond level {n}")
        out = np.ones(self.alphabet_sizes[:n]) if f.poly is None else self._poly_table(f.poly, n)
        if f.exponent is not None:
            out = out * np.exp(-self._poly_table(f.exponent, n))
        return out


def _level_of(f) -> int:
    if isinstance(f, TableFunction):
        return f.level
    if isinstance(f, Polynomial):
        return max(f.support_level, 1)
    return f.level


def brute_force_integral(f: DiscreteFunction, system: FiniteProductSystem, n: int) -> float:
    """Weighted sum of ``f`` over all level-``n`` outcomes (correctly rounded)."""
    table = system.table(f, n)
    return math.fsum((table * system.joint_weights(n)).ravel())


def discrete_conditional_expectation(f: DiscreteFunction, n: int, system: FiniteProductSystem) -> TableFunction:
    """Average ``f`` over coordinates ``n+1..level(f)``."""
    m = max(_level_of(f), n)
    system._guard(m)
    table = system.table(f, m)
    for axis in range(m - 1, n - 1, -1):
        table = np.tensordot(table, system.weights[axis], axes=([axis], [0]))
    return TableFunction(table)


def discrete_lp_norm(f: DiscreteFunction, system: FiniteProductSystem, n: int, p: float = 2.0) -> float:
    table = system.table(f, n)
    return float(np.sum(system.joint_weights(n) * np.abs(table) ** p)) ** (1.0 / p)


def verify_tower(f: DiscreteFunction, system: FiniteProductSystem, n: int, m: int, tol: float = EXACT_TOL) -> bool:
    """``E_n(E_m(f)) == E_n(f)`` on every level-``n`` outcome, within ``tol``."""
    if not 1 <= n <= m:
        raise ValueError("need 1 <= n <= m")
    inner = discrete_conditional_expectation(f, m, system)
    lhs = discrete_conditional_expectation(inner, n, system).table
    rhs = discrete_conditional_expectation(f, n, system).table
    return bool(np.abs(lhs - rhs).max() <= tol)
