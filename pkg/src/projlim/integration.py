"""Integrals against Gaussian marginals and their limits along the chain.

Polynomial integrands are integrated exactly through Wick moments; anything
carrying an ``exp(-Q)`` factor goes through Monte Carlo.  The integral over the
limit measure is approximated level by level with the conditional expectations
``f_n = E[f | x1..xn]`` and read off once the resulting net settles.
"""
from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Optional, Union

import numpy as np

from .diagram import stabilization_index
from .errors import NonFiniteValue
from .gaussian import (
    CovarianceKernel,
    GaussianMarginal,
    WickMoments,
    build_marginal,
    gaussian_conditional_expectation,
    sample,
)
from .polynomial import CylinderFunction, Polynomial, pullback

EXACT = "exact-wick"
MONTE_CARLO = "monte-carlo"
NONFINITE_LIMIT = 1e-3
DEFAULT_SAMPLES = 200_000


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    stderr: float
    samples: int
    method: str
    nonfinite: int = 0

    def __post_init__(self):
        if self.method not in (EXACT, MONTE_CARLO):
            raise ValueError(f"unknown method {self.method!r}")
        if (self.stderr == 0.0) != (self.method == EXACT):
            raise ValueError("stderr must be 0 exactly for exact integrals")

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples,
                "method": self.method, "nonfinite": self.nonfinite}


def _as_cylinder(f) -> CylinderFunction:
    return CylinderFunction(f) if isinstance(f, Polynomial) else f


def _check_level(f: CylinderFunction, marginal: GaussianMarginal):
    if f.support_level > marginal.n:
        raise ValueError(f"integrand depends on x{f.support_level}, marginal has {marginal.n} coordinates")


def exact_polynomial_integral(f, marginal: GaussianMarginal) -> IntegralEstimate:
    f = _as_cylinder(f)
    _check_level(f, marginal)
    value = WickMoments(marginal.C).integrate(f.polynomial())
    return IntegralEstimate(value=value, stderr=0.0, samples=0, method=EXACT)


def _constant_estimate(f: CylinderFunction) -> IntegralEstimate:
    return IntegralEstimate(value=f.constant_value(), stderr=0.0, samples=0, method=EXACT)


def _mc_values(f: CylinderFunction, marginal: GaussianMarginal, samples: int, seed: int,
               workers: Optional[int] = None) -> np.ndarray:
    pts = sample(marginal, samples, seed, workers)
    vals = f.evaluate_batch(pts)
    bad = int(np.count_nonzero(~np.isfinite(vals)))
    if bad > NONFINITE_LIMIT * samples:
        raise NonFiniteValue(int(np.flatnonzero(~np.isfinite(vals))[0]), f"{bad} of {samples} evaluations")
    return vals


def _mean_estimate(vals: np.ndarray, total: int) -> IntegralEstimate:
    good = vals[np.isfinite(vals)]
    n = good.size
    mean = float(np.mean(good))
    stderr = float(np.std(good, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    if stderr == 0.0:
        # all draws identical although the integrand is not constant
        stderr = math.ulp(abs(mean)) if mean else math.ulp(1.0)
    return IntegralEstimate(value=mean, stderr=stderr, samples=n, method=MONTE_CARLO,
                            nonfinite=total - n)


def mc_integral(f, marginal: GaussianMarginal, samples: int, seed: int,
                workers: Optional[int] = None) -> IntegralEstimate:
    """Sample mean of ``f`` with standard error ``std / sqrt(N)``.

    Constant integrands are detected and returned exactly.  Non-finite
    evaluations are dropped and counted; more than 0.1% of them is an error.
    """
    f = _as_cylinder(f)
    _check_level(f, marginal)
    if f.is_constant():
        return _constant_estimate(f)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    return _mean_estimate(_mc_values(f, marginal, samples, seed, workers), samples)


def lp_norm(f, marginal: GaussianMarginal, p: float, samples: Optional[int] = None,
            seed: int = 0) -> float:
    """``(E|f|^p)^(1/p)``; exact for polynomial ``f`` and even integer ``p``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    f = _as_cylinder(f)
    _check_level(f, marginal)
    if f.is_polynomial and float(p).is_integer() and int(p) % 2 == 0:
        poly = f.polynomial()
        if poly.is_zero():
            return 0.0
        moment = WickMoments(marginal.C).integrate(poly ** int(p))
        return max(moment, 0.0) ** (1.0 / p)
    if f.is_constant():
        return abs(f.constant_value())
    vals = _mc_values(f, marginal, samples or DEFAULT_SAMPLES, seed)
    vals = np.abs(vals[np.isfinite(vals)]) ** p
    return float(np.mean(vals)) ** (1.0 / p)


class CoCauchyFamily:
    """One cylinder function per level, integrated against one Gaussian chain.

    ``members`` is either a sequence (entry 0 is level 1) or a callable
    ``n -> f_n``.  Each ``f_n`` must depend on ``x1..xn`` only.
    """

    def __init__(self, members: Union[Sequence, Callable[[int], CylinderFunction]],
                 kernel: CovarianceKernel, samples: int = DEFAULT_SAMPLES, seed: int = 0):
        self._members = members
        self.kernel = kernel
        self.samples = samples
        self.seed = seed
        self._cache: dict = {}
        self._marginals: dict = {}

    def __getitem__(self, n: int) -> CylinderFunction:
        if n < 1:
            raise IndexError("levels start at 1")
        if n not in self._cache:
            if callable(self._members):
                f = self._members(n)
            else:
                if n > len(self._members):
                    raise IndexError(f"family has no member at level {n}")
                f = self._members[n - 1]
            f = _as_cylinder(f)
            if f.support_level > n:
                raise ValueError(f"member {n} depends on x{f.support_level}")
            self._cache[n] = f if f.level == n else CylinderFunction(f.poly, f.exponent, n)
        return self._cache[n]

    def members(self, horizon: int) -> list:
        return [self[n] for n in range(1, horizon + 1)]

    def marginal(self, n: int) -> GaussianMarginal:
        if n not in self._marginals:
            self._marginals[n] = build_marginal(self.kernel, n)
        return self._marginals[n]

    def distance(self, n: int, m: int, p: float) -> float:
        """``||pullback(f_n, m) - f_m||_p`` at level ``m``."""
        diff = pullback(self[n], m) - self[m]
        return lp_norm(diff, self.marginal(m), p, self.samples, self.seed)

    def distance_to(self, other: "CoCauchyFamily", n: int, p: float) -> float:
        return lp_norm(self[n] - other[n], self.marginal(n), p, self.samples, self.seed)


def _monomial_basis(n: int, degree: int) -> list:
    basis = [()]
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(range(1, n + 1), d):
            mono: dict = {}
            for c in combo:
                mono[c] = mono.get(c, 0) + 1
            basis.append(tuple(sorted(mono.items())))
    return basis


def mc_conditional_expectation(f, n: int, kernel: CovarianceKernel, degree: int = 4,
                               samples: int = DEFAULT_SAMPLES, seed: int = 0) -> CylinderFunction:
    """Least-squares polynomial regression of ``f`` on ``x1..xn``.

    Fallback for integrands with an exponential factor, where no closed form
    exists.  The result is an approximation of ``E[f | x1..xn]`` within the
    span of monomials of total degree ``<= degree``.
    """
    f = _as_cylinder(f)
    m = max(f.support_level, n)
    if n >= f.support_level:
        return CylinderFunction(f.poly, f.exponent, n)
    pts = sample(build_marginal(kernel, m), samples, seed)
    y = f.evaluate_batch(pts)
    keep = np.isfinite(y)
    basis = _monomial_basis(n, degree)
    design = np.column_stack([Polynomial({mono: 1.0}).evaluate(pts[keep]) for mono in basis])
    coeffs, *_ = np.linalg.lstsq(design, y[keep], rcond=None)
    return CylinderFunction(Polynomial({mono: c for mono, c in zip(basis, coeffs)}), level=n)


def conditional_sequence(f, kernel: CovarianceKernel, horizon: int, samples: int = DEFAULT_SAMPLES,
                         seed: int = 0, regression_degree: int = 4) -> CoCauchyFamily:
    """``f_n = E[f | x1..xn]`` for ``n = 1..horizon``; ``f_n`` is ``f`` itself from its support level on."""
    f = _as_cylinder(f)
    if f.support_level > horizon:
        raise ValueError(f"integrand depends on x{f.support_level}, beyond horizon {horizon}")
    members = []
    for n in range(1, horizon + 1):
        if n >= f.support_level:
            members.append(CylinderFunction(f.poly, f.exponent, n))
        elif f.is_polynomial:
            members.append(gaussian_conditional_expectation(f, n, kernel))
        else:
            members.append(mc_conditional_expectation(f, n, kernel, regression_degree, samples,
                                                      _row_seed(seed, n)))
    return CoCauchyFamily(members, kernel, samples, seed)


@dataclass
class ConvergenceTable:
    rows: list  # (level, IntegralEstimate)
    value: Optional[float]
    stabilized_at: Optional[int] = None
    tol: float = 0.0
    window: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = [lvl for lvl, _ in self.rows]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")

    @property
    def converged(self) -> bool:
        return self.value is not None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "value", "stderr", "method"])
        for level, est in self.rows:
            writer.writerow([level, repr(est.value), repr(est.stderr), est.method])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [{"level": lvl, **est.to_dict()} for lvl, est in self.rows],
            "verdict": {"converged": self.converged, "value": self.value,
                        "stabilized_at": self.stabilized_at},
            "tol": self.tol,
            "window": self.window,
            **self.meta,
        }


def _row_seed(seed: int, level: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(level)]).generate_state(1, np.uint64)[0])


def table_from_estimates(rows: Sequence, tol: float, window: int, meta: Optional[dict] = None) -> ConvergenceTable:
    """Attach a verdict to level-ordered estimates.

    Exact rows must agree within ``tol``; Monte Carlo rows within
    ``max(tol, 5 * combined stderr)``.
    """
    values = [est.value for _, est in rows]
    errors = [est.stderr for _, est in rows]
    idx = stabilization_index(values, tol, window, errors)
    value = None if idx is None else float(values[idx])
    level = None if idx is None else rows[idx][0]
    return ConvergenceTable(list(rows), value, level, tol, window, meta or {})


def projective_limit_integral(f, kernel: CovarianceKernel, tol: float, window: int, horizon: int,
                              samples: int = DEFAULT_SAMPLES, seed: int = 0) -> ConvergenceTable:
    """Integrals of ``f_n = E[f | x1..xn]`` against the level-``n`` marginals, ``n = 1..horizon``."""
    if horizon < window:
        raise ValueError("horizon must be at least the window length")
    family = conditional_sequence(f, kernel, horizon, samples, seed)
    rows = []
    for n in range(1, horizon + 1):
        fn = family[n]
        marg = family.marginal(n)
        if fn.is_constant():
            est = _constant_estimate(fn)
        elif fn.is_polynomial:
            est = exact_polynomial_integral(fn, marg)
        else:
            est = mc_integral(fn, marg, samples, _row_seed(seed, n))
        rows.append((n, est))
    return table_from_estimates(rows, tol, window)
