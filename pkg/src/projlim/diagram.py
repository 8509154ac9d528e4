"""Chains of levels, consistency checks and limits of nets.

Levels are the positive integers with their usual order.  The restriction
from level ``m`` down to level ``n <= m`` is the projection keeping the first
``n`` coordinates.  Nets are plain sequences indexed by level (entry 0 belongs
to level 1).  A net "converges" once ``window`` consecutive entries are
pairwise within a tolerance; ``None`` stands for "not converged" or "not
detected" throughout.
"""
from __future__ import annotations

import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import LevelConstructionError, NonFiniteValue, NormEvaluationError, ProjlimError

CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class Restriction:
    """Projection from level ``source`` onto level ``target``."""

    target: int
    source: int

    def __post_init__(self):
        if not 1 <= self.target <= self.source:
            raise ValueError(f"restriction needs 1 <= n <= m, got n={self.target}, m={self.source}")

    def __call__(self, point):
        point = np.asarray(point)
        if point.shape[-1] != self.source:
            raise ValueError(f"point lives at level {point.shape[-1]}, restriction starts at {self.source}")
        return point[..., : self.target]

    def compose(self, inner: "Restriction") -> "Restriction":
        """``self o inner`` (apply ``inner`` first)."""
        if inner.target != self.source:
            raise ValueError("restrictions do not compose")
        return Restriction(self.target, inner.source)

    @property
    def is_identity(self) -> bool:
        return self.target == self.source


class ProjectiveChain:
    """Levels ``1..max_level`` with marginals and coordinate restrictions.

    ``marginal_at(n)`` returns a :class:`~projlim.gaussian.GaussianMarginal`
    or a :class:`~projlim.discrete.DiscreteMarginal`.
    """

    def __init__(self, max_level: int, marginal_at: Callable[[int], Any], name: str = "chain"):
        if max_level < 1:
            raise ValueError("a chain has at least one level")
        self.max_level = int(max_level)
        self._marginal_at = marginal_at
        self.name = name
        self._cache: dict = {}

    def marginal_at(self, n: int):
        if not 1 <= n <= self.max_level:
            raise ValueError(f"level {n} outside 1..{self.max_level}")
        if n not in self._cache:
            try:
                self._cache[n] = self._marginal_at(n)
            except ProjlimError as exc:
                raise LevelConstructionError(n, exc) from exc
        return self._cache[n]

    def restriction(self, n: int, m: int) -> Restriction:
        if m > self.max_level:
            raise ValueError(f"level {m} beyond the chain prefix {self.max_level}")
        return Restriction(n, m)

    @classmethod
    def gaussian(cls, kernel, max_level: int) -> "ProjectiveChain":
        from .gaussian import build_marginal

        return cls(max_level, lambda n: build_marginal(kernel, n), name=f"gaussian[{kernel.source}]")

    @classmethod
    def from_covariances(cls, matrices: Sequence) -> "ProjectiveChain":
        """Chain whose level-``n`` covariance is ``matrices[n-1]`` (not necessarily consistent)."""
        from .gaussian import CovarianceKernel, build_marginal

        mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
        for n, mat in enumerate(mats, start=1):
            if mat.shape != (n, n):
                raise ValueError(f"level {n} covariance must be {n}x{n}, got {mat.shape}")
        return cls(len(mats), lambda n: build_marginal(CovarianceKernel.from_matrix(mats[n - 1]), n),
                   name="gaussian[explicit]")

    @classmethod
    def discrete(cls, system) -> "ProjectiveChain":
        return cls(system.max_level, system.marginal, name="discrete")

    @classmethod
    def from_tables(cls, tables: Sequence) -> "ProjectiveChain":
        from .discrete import DiscreteMarginal

        margs = [DiscreteMarginal(np.asarray(t, dtype=float)) for t in tables]
        return cls(len(margs), lambda n: margs[n - 1], name="discrete[explicit]")


def pushforward(marginal, n: int):
    """Image of a level-``m`` marginal under the projection onto level ``n``."""
    if hasattr(marginal, "C"):
        return np.asarray(marginal.C)[:n, :n]
    table = np.asarray(marginal.probabilities)
    extra = tuple(range(n, table.ndim))
    return table.sum(axis=extra) if extra else table


def _marginal_array(marginal):
    return np.asarray(marginal.C) if hasattr(marginal, "C") else np.asarray(marginal.probabilities)


@dataclass
class ConsistencyReport:
    passed: bool
    depth: int
    checked: int
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "depth": self.depth, "checked": self.checked,
                "failures": self.failures}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def check_chain_consistency(chain: ProjectiveChain, depth: int, tol: float = CONSISTENCY_TOL) -> ConsistencyReport:
    """Composition law for all ``n <= m <= k <= depth`` and pushforward consistency for all ``n <= m``.

    Marginal construction errors propagate as :class:`LevelConstructionError`.
    """
    if not 1 <= depth <= chain.max_level:
        raise ValueError(f"depth {depth} outside 1..{chain.max_level}")
    failures = []
    checked = 0
    for k in range(1, depth + 1):
        probe = np.arange(1.0, k + 1.0)
        for m in range(1, k + 1):
            for n in range(1, m + 1):
                checked += 1
                direct = chain.restriction(n, k)
                composed = chain.restriction(n, m).compose(chain.restriction(m, k))
                same = composed == direct and np.array_equal(composed(probe), direct(probe))
                if n == m == k:
                    same = same and direct.is_identity and np.array_equal(direct(probe), probe)
                if not same:
                    failures.append({"check": "composition", "triple": [n, m, k], "discrepancy": 1.0})

    margs = [chain.marginal_at(n) for n in range(1, depth + 1)]
    for m in range(1, depth + 1):
        for n in range(1, m + 1):
            checked += 1
            image = pushforward(margs[m - 1], n)
            target = _marginal_array(margs[n - 1])
            if image.shape != target.shape:
                gap = math.inf
            else:
                gap = float(np.abs(image - target).max())
            if not gap <= tol:
                failures.append({"check": "pushforward", "triple": [n, m],
                                 "discrepancy": gap if math.isfinite(gap) else None})
    return ConsistencyReport(passed=not failures, depth=depth, checked=checked, failures=failures)


@dataclass(frozen=True)
class ScalarNet:
    """Real values indexed by levels ``1, 2, ...``."""

    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(float(v) for v in values))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, level: int) -> float:
        return self.values[level - 1]


def stabilization_index(values: Sequence[float], tol: float, window: int,
                        errors: Optional[Sequence[float]] = None) -> Optional[int]:
    """0-based index of the last entry of the first stabilised window, or ``None``.

    With ``errors`` two entries agree when their gap is at most
    ``max(tol, 5 * sqrt(e_i**2 + e_j**2))``.
    """
    vals = [float(v) for v in values]
    if window < 2:
        raise ValueError("window must be at least 2")
    if len(vals) < window:
        raise ValueError(f"net has {len(vals)} entries, window needs {window}")
    for i, v in enumerate(vals):
        if not math.isfinite(v):
            raise NonFiniteValue(i, v)
    errs = [0.0] * len(vals) if errors is None else [float(e) for e in errors]

    def agree(i, j):
        bound = max(tol, 5.0 * math.hypot(errs[i], errs[j]))
        return abs(vals[i] - vals[j]) <= bound

    for start in range(len(vals) - window + 1):
        idx = range(start, start + window)
        if all(agree(i, j) for i in idx for j in idx if i < j):
            return start + window - 1
    return None


def net_limit(net, tol: float, window: int, errors: Optional[Sequence[float]] = None) -> Optional[float]:
    """Last value of the first run of ``window`` entries pairwise within ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    values = net.values if isinstance(net, ScalarNet) else list(net)
    idx = stabilization_index(values, tol, window, errors)
    return None if idx is None else float(values[idx])


def co_cauchy_check(family, p: float, eps: float, horizon: int) -> Optional[int]:
    """Smallest level ``l`` with ``||pullback(f_n) - f_m||_p < eps`` for all ``l <= n <= m <= horizon``.

    At least one pair ``n < m`` has to fit below the horizon, so ``l`` is at
    most ``horizon - 1``; otherwise ``None`` is returned.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    for n in range(horizon - 1, 0, -1):
        for m in range(n + 1, horizon + 1):
            try:
                dist = family.distance(n, m, p)
            except NormEvaluationError:
                raise
            except (ProjlimError, ArithmeticError, TypeError) as exc:
                raise NormEvaluationError(m, exc) from exc
            if not dist < eps:
                return n + 1 if n + 1 < horizon else None
    return 1


def family_equivalence(f, g, p: float, tol: float, horizon: int, window: int = 3,
                       stab_tol: Optional[float] = None) -> bool:
    """Whether ``||f_n - g_n||_p`` settles at a value ``<= tol``.

    The net is declared settled with :func:`net_limit` at ``stab_tol``
    (default ``tol / 100``) so that slowly decaying distances are not frozen
    early at a value far above their limit.
    """
    stab_tol = tol / 100.0 if stab_tol is None else stab_tol
    net = []
    for n in range(1, horizon + 1):
        try:
            net.append(f.distance_to(g, n, p))
        except NormEvaluationError:
            raise
        except (ProjlimError, ArithmeticError, TypeError) as exc:
            raise NormEvaluationError(n, exc) from exc
    limit = net_limit(net, stab_tol, window)
    return limit is not None and limit <= tol
