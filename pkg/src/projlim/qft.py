"""Lattice free field, Schwinger functions and a toy interacting measure.

The complete system is the list of lattice sites (row-major for ``d = 2``):
coordinate ``x_{s+1}`` is the field at site ``s`` and a test function is the
vector of its site values, so ``phi(f) = sum_s f[s] * x_{s+1}``.  The free
covariance is the inverse of ``-Laplacian + m^2`` with periodic
nearest-neighbour Laplacian and unit site weights.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from itertools import permutations
from typing import Optional

import numpy as np

from .errors import DegreeGuardError, DimensionMismatch, IllConditionedNormalization, NonFiniteValue
from .gaussian import WICK_DEGREE_GUARD, CovarianceKernel, WickMoments, build_marginal, sample
from .integration import MONTE_CARLO, NONFINITE_LIMIT, IntegralEstimate
from .polynomial import Polynomial

SITE_GUARD = 4096
MAX_POINTS = 12


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    sites_per_dim: int
    a: float = 1.0
    m: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d = 1 or d = 2 lattices")
        if self.sites_per_dim < 1:
            raise ValueError("need at least one site per dimension")
        if not self.a > 0:
            raise ValueError("spacing must be positive")
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.sites > SITE_GUARD:
            raise ValueError(f"{self.sites} sites exceed the guard {SITE_GUARD}")

    @property
    def sites(self) -> int:
        return self.sites_per_dim ** self.d

    @property
    def shape(self) -> tuple:
        return (self.sites_per_dim,) * self.d

    def site_coords(self) -> np.ndarray:
        """Integer coordinates of every site, in enumeration order."""
        return np.array(list(np.ndindex(*self.shape)), dtype=int).reshape(self.sites, self.d)


def lattice_laplacian(lattice: LatticeSpec) -> np.ndarray:
    """Matrix of ``-Laplacian`` (periodic, nearest neighbour, ``1/a^2`` weights)."""
    N = lattice.sites_per_dim
    coords = lattice.site_coords()
    index = {tuple(c): i for i, c in enumerate(coords)}
    L = np.zeros((lattice.sites, lattice.sites))
    w = 1.0 / lattice.a ** 2
    for i, c in enumerate(coords):
        for mu in range(lattice.d):
            for step in (1, -1):
                nb = c.copy()
                nb[mu] = (nb[mu] + step) % N
                L[i, index[tuple(nb)]] -= w
            L[i, i] += 2 * w
    return L


def momentum_eigenvalues(lattice: LatticeSpec) -> np.ndarray:
    """Eigenvalues of ``-Laplacian + m^2`` on the FFT momentum grid."""
    N = lattice.sites_per_dim
    k = 2.0 - 2.0 * np.cos(2 * np.pi * np.arange(N) / N)
    lam = np.zeros(lattice.shape)
    for mu in range(lattice.d):
        shape = [1] * lattice.d
        shape[mu] = N
        lam = lam + k.reshape(shape) / lattice.a ** 2
    return lam + lattice.m ** 2


def free_covariance(lattice: LatticeSpec) -> CovarianceKernel:
    """``scale * (-Laplacian + m^2)^-1`` computed by FFT."""
    corr = np.real(np.fft.ifftn(1.0 / momentum_eigenvalues(lattice)))
    coords = lattice.site_coords()
    disp = (coords[:, None, :] - coords[None, :, :]) % lattice.sites_per_dim
    C = corr[tuple(disp[..., mu] for mu in range(lattice.d))] * lattice.scale
    C = 0.5 * (C + C.T)
    spec = {"type": "lattice", "d": lattice.d, "n": lattice.sites_per_dim, "a": lattice.a,
            "m": lattice.m, "scale": lattice.scale}
    kernel = CovarianceKernel.from_matrix(C, source="lattice", spec=spec)
    kernel.lattice = lattice
    return kernel


def free_covariance_direct(lattice: LatticeSpec) -> np.ndarray:
    """Dense-solve counterpart of :func:`free_covariance`."""
    op = lattice_laplacian(lattice) + lattice.m ** 2 * np.eye(lattice.sites)
    return lattice.scale * np.linalg.solve(op, np.eye(lattice.sites))


def _test_matrix(fs, kernel: CovarianceKernel) -> tuple:
    F = np.array([np.asarray(f, dtype=float) for f in fs])
    if F.ndim != 2:
        raise DimensionMismatch("test functions must share one length")
    if not np.all(np.isfinite(F)):
        raise ValueError("test functions have non-finite values")
    if kernel.max_level is not None and F.shape[1] != kernel.max_level:
        raise DimensionMismatch(
            f"test functions have {F.shape[1]} sites, kernel has {kernel.max_level}")
    C = kernel.matrix(F.shape[1])
    return F, C


def gram(fs, kernel: CovarianceKernel) -> np.ndarray:
    """``G[i, j] = c(f_i, f_j) = f_i^T C f_j``."""
    F, C = _test_matrix(fs, kernel)
    return F @ C @ F.T


def _hafnian(G: np.ndarray, idx: tuple) -> float:
    if not idx:
        return 1.0
    first, rest = idx[0], idx[1:]
    total = 0.0
    for pos, j in enumerate(rest):
        total += G[first, j] * _hafnian(G, rest[:pos] + rest[pos + 1:])
    return total


def schwinger_free(fs: Sequence, kernel: CovarianceKernel) -> float:
    """Free-field ``S_k(f_1, ..., f_k)``: sum over perfect matchings of pair covariances."""
    k = len(fs)
    if not 1 <= k <= MAX_POINTS:
        raise ValueError(f"need 1..{MAX_POINTS} test functions, got {k}")
    G = gram(fs, kernel)
    if k % 2:
        return 0.0
    return _hafnian(G, tuple(range(k)))


def schwinger_permutation_sum(fs: Sequence, kernel: CovarianceKernel) -> float:
    """Same quantity summed over all ``k!`` orderings, divided by ``2^(k/2) (k/2)!``."""
    k = len(fs)
    if k > 8:
        raise ValueError("the permutation sum is limited to k <= 8")
    G = gram(fs, kernel)
    if k % 2:
        return 0.0
    half = k // 2
    total = math.fsum(
        math.prod(G[s[2 * j], s[2 * j + 1]] for j in range(half)) for s in permutations(range(k))
    )
    return total / (2 ** half * math.factorial(half))


@dataclass(frozen=True)
class InteractionSpec:
    """``V = coupling * base``; ``base`` must be bounded below."""

    base: Polynomial
    coupling: float

    def __post_init__(self):
        if not self.coupling >= 0:
            raise ValueError("coupling must be >= 0")
        if not self.base.min_top_degree_check():
            raise ValueError("interaction polynomial is not bounded below (even top degree, "
                             "positive pure powers required)")

    @classmethod
    def local_power(cls, coupling: float, degree: int, sites: Sequence[int]) -> "InteractionSpec":
        """``coupling * sum_{s in sites} x_{s+1}^degree`` (sites are 0-based)."""
        if degree < 2 or degree % 2:
            raise ValueError("monomial degree must be even and >= 2")
        if not sites:
            raise ValueError("interaction needs at least one site")
        base = Polynomial.zero()
        for s in sites:
            if s < 0:
                raise ValueError("site indices are 0-based and non-negative")
            base = base + Polynomial.variable(int(s) + 1, degree)
        return cls(base, float(coupling))

    @property
    def potential(self) -> Polynomial:
        return self.base.scale(self.coupling)


@dataclass(frozen=True)
class SchwingerEstimate:
    value: float
    stderr: float
    z: float
    z_stderr: float
    samples: int
    level: int

    def as_integral(self) -> IntegralEstimate:
        return IntegralEstimate(self.value, self.stderr, self.samples, MONTE_CARLO)

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "z": self.z, "z_stderr": self.z_stderr,
                "samples": self.samples, "level": self.level}


def required_level(fs, interaction: Optional[InteractionSpec] = None) -> int:
    F = np.array([np.asarray(f, dtype=float) for f in fs])
    support = np.flatnonzero(np.any(F != 0, axis=0))
    level = int(support[-1]) + 1 if support.size else 1
    if interaction is not None:
        level = max(level, interaction.base.support_level)
    return level


def _check_level(fs, interaction, level: Optional[int]) -> int:
    need = required_level(fs, interaction)
    if level is None:
        return need
    if level < need:
        raise ValueError(f"level {level} is below the support level {need}")
    return int(level)


def field_product(fs, level: int) -> Polynomial:
    """``prod_i phi(f_i)`` restricted to the first ``level`` sites, as a polynomial."""
    out = Polynomial.constant(1.0)
    for f in fs:
        out = out * Polynomial.linear(np.asarray(f, dtype=float)[:level])
    return out


def schwinger_interacting(fs: Sequence, interaction: InteractionSpec, kernel: CovarianceKernel,
                          level: Optional[int] = None, samples: int = 1_000_000, seed: int = 0,
                          workers: Optional[int] = None) -> SchwingerEstimate:
    """``<prod phi(f_i) e^-V>_n / <e^-V>_n`` by Monte Carlo on the level-``n`` marginal.

    The standard error of the ratio comes from the delta method.
    """
    k = len(fs)
    if not 1 <= k <= MAX_POINTS:
        raise ValueError(f"need 1..{MAX_POINTS} test functions, got {k}")
    _test_matrix(fs, kernel)
    n = _check_level(fs, interaction, level)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    X = sample(build_marginal(kernel, n), samples, seed, workers)
    F = np.array([np.asarray(f, dtype=float)[:n] for f in fs])
    with np.errstate(over="ignore", invalid="ignore"):
        prod = np.prod(X @ F.T, axis=1)
        weight = np.exp(-interaction.potential.evaluate(X))
        num = prod * weight
    ok = np.isfinite(num) & np.isfinite(weight)
    bad = samples - int(np.count_nonzero(ok))
    if bad > NONFINITE_LIMIT * samples:
        raise NonFiniteValue(int(np.flatnonzero(~ok)[0]), f"{bad} of {samples} evaluations")
    num, weight = num[ok], weight[ok]
    N = num.size
    z = float(np.mean(weight))
    z_stderr = float(np.std(weight, ddof=1) / math.sqrt(N))
    if abs(z) <= 5.0 * z_stderr:
        raise IllConditionedNormalization(f"Z = {z:.3g} is within 5 standard errors ({z_stderr:.3g}) of 0")
    ratio = float(np.mean(num)) / z
    cov = np.cov(np.vstack([num, weight]), ddof=1)
    var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / (N * z ** 2)
    return SchwingerEstimate(value=ratio, stderr=math.sqrt(max(var, 0.0)), z=z, z_stderr=z_stderr,
                             samples=N, level=n)


def perturbative_coefficients(fs: Sequence, interaction: InteractionSpec, kernel: CovarianceKernel,
                              level: Optional[int] = None, order: int = 1) -> list:
    """Coefficients ``c_0..c_order`` of the normalised correlator in powers of the coupling.

    With ``P = prod phi(f_i)``, ``a_j = <P V0^j>`` and ``b_j = <V0^j>`` (free
    Gaussian expectations, exact via Wick), ``c_0 = a_0``,
    ``c_1 = a_0 b_1 - a_1`` and ``c_2 = a_2/2 - a_1 b_1 + a_0 (b_1^2 - b_2/2)``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    n = _check_level(fs, interaction, level)
    _test_matrix(fs, kernel)
    P = field_product(fs, n)
    V0 = interaction.base
    if P.degree + order * V0.degree > WICK_DEGREE_GUARD:
        raise DegreeGuardError("expansion exceeds the Wick degree guard")
    wick = WickMoments(build_marginal(kernel, n).C)
    a = [wick.integrate(P * V0 ** j) for j in range(order + 1)]
    b = [1.0] + [wick.integrate(V0 ** j) for j in range(1, order + 1)]
    coeffs = [a[0], a[0] * b[1] - a[1]]
    if order == 2:
        coeffs.append(a[2] / 2 - a[1] * b[1] + a[0] * (b[1] ** 2 - b[2] / 2))
    return coeffs


def perturbative_oracle(fs: Sequence, interaction: InteractionSpec, kernel: CovarianceKernel,
                        level: Optional[int] = None) -> float:
    """First-order value ``S_free - coupling * (<P V0> - S_free <V0>)``."""
    c0, c1 = perturbative_coefficients(fs, interaction, kernel, level, order=1)
    return c0 + interaction.coupling * c1
