"""Finite-dimensional sections of a centred Gaussian measure.

A :class:`CovarianceKernel` hands out the leading ``n x n`` blocks
``C[i, j] = c(xi_i, xi_j)`` of a covariance form evaluated on a fixed complete
system.  Each level ``n`` of the chain carries the marginal ``N(0, C_n)``;
because ``C_n`` is the leading block of ``C_m`` the marginals are consistent
under coordinate projection by construction.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from . import rng
from .errors import DegreeGuardError, DimensionMismatch, NotPositiveDefinite
from .polynomial import CylinderFunction, Polynomial

WICK_DEGREE_GUARD = 16
SPD_RTOL = 1e-12


class CovarianceKernel:
    """Source of covariance blocks for the levels of a Gaussian chain.

    ``block(n)`` must return the leading ``n x n`` block.  ``max_level`` is
    ``None`` for kernels defined on every level.
    """

    def __init__(self, source: str, block: Callable[[int], np.ndarray],
                 max_level: Optional[int] = None, spec: Optional[dict] = None):
        self.source = source
        self._block = block
        self.max_level = max_level
        self.spec = spec or {"type": source}

    @classmethod
    def identity(cls) -> "CovarianceKernel":
        return cls("identity", lambda n: np.eye(n))

    @classmethod
    def from_matrix(cls, entries, source: str = "matrix", spec: Optional[dict] = None) -> "CovarianceKernel":
        mat = np.array(entries, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise DimensionMismatch("covariance matrix must be square and non-empty")
        if not np.all(np.isfinite(mat)):
            raise ValueError("covariance matrix has non-finite entries")
        scale = max(np.abs(mat).max(), 1.0)
        if np.abs(mat - mat.T).max() > SPD_RTOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        spec = spec or {"type": "matrix", "entries": mat.tolist()}
        return cls(source, lambda n: mat[:n, :n].copy(), mat.shape[0], spec)

    def matrix(self, n: int) -> np.ndarray:
        n = int(n)
        if n < 1:
            raise ValueError("levels start at 1")
        if self.max_level is not None and n > self.max_level:
            raise DimensionMismatch(f"kernel is defined up to level {self.max_level}, asked for {n}")
        return np.asarray(self._block(n), dtype=float)

    def entry(self, i: int, j: int) -> float:
        """Covariance of coordinates ``i`` and ``j`` (1-based)."""
        return float(self.matrix(max(i, j))[i - 1, j - 1])

    def __repr__(self):
        return f"CovarianceKernel(source={self.source!r}, max_level={self.max_level})"


@dataclass(frozen=True)
class GaussianMarginal:
    n: int
    C: np.ndarray
    chol: np.ndarray
    Cinv: np.ndarray
    logdet: float


def cholesky_checked(C: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; no jitter, failure reports the 1-based pivot."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    L, info = dpotrf(C, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(int(info))
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    floor = SPD_RTOL * np.linalg.norm(C)
    pivots = np.diag(L) ** 2
    for k in range(n):
        if not pivots[k] > floor:
            raise NotPositiveDefinite(k + 1)
    return np.tril(L)


def build_marginal(kernel: CovarianceKernel, n: int) -> GaussianMarginal:
    C = kernel.matrix(n)
    L = cholesky_checked(C)
    Cinv = cho_solve((L, True), np.eye(n))
    Cinv = 0.5 * (Cinv + Cinv.T)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))

    scale = np.abs(C).max()
    if np.abs(L @ L.T - C).max() > 1e-10 * scale:
        raise ArithmeticError(f"level {n}: Cholesky reconstruction out of tolerance")
    if np.abs(Cinv @ C - np.eye(n)).max() > 1e-8:
        raise ArithmeticError(f"level {n}: inverse out of tolerance")
    for arr in (C, L, Cinv):
        arr.setflags(write=False)
    return GaussianMarginal(n=n, C=C, chol=L, Cinv=Cinv, logdet=logdet)


def density(marginal: GaussianMarginal, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (marginal.n,):
        raise DimensionMismatch(f"expected a vector of length {marginal.n}, got shape {x.shape}")
    z = solve_triangular(marginal.chol, x, lower=True)
    return math.exp(-0.5 * float(z @ z) - 0.5 * marginal.logdet - 0.5 * marginal.n * math.log(2 * math.pi))


def sample(marginal: GaussianMarginal, count: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    """``count x n`` draws from ``N(0, C)`` as rows ``chol @ z``."""
    z = rng.standard_normals(count, marginal.n, seed, workers)
    return z @ marginal.chol.T


class WickMoments:
    """Exact moments of ``N(0, C)`` by recursive pairing.

    Monomial keys use coordinates ``offset + 1 ... offset + C.shape[0]``.
    Results are memoised on the multiset of remaining indices.
    """

    def __init__(self, C: np.ndarray, offset: int = 0):
        self.C = np.asarray(C, dtype=float)
        self.offset = offset
        self._memo: dict = {(): 1.0}

    def monomial(self, mono) -> float:
        degree = sum(p for _, p in mono)
        if degree > WICK_DEGREE_GUARD:
            raise DegreeGuardError(f"total degree {degree} exceeds the Wick guard {WICK_DEGREE_GUARD}")
        if degree % 2:
            return 0.0
        dim = self.C.shape[0]
        key = []
        for coord, p in mono:
            idx = coord - self.offset - 1
            if not 0 <= idx < dim:
                raise DimensionMismatch(f"x{coord} outside the covariance block")
            key.append((idx, p))
        return self._pairings(tuple(key))

    def _pairings(self, key: tuple) -> float:
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        (i, ci), rest = key[0], key[1:]
        C = self.C
        total = 0.0
        if ci >= 2:
            head = ((i, ci - 2),) if ci > 2 else ()
            total += (ci - 1) * C[i, i] * self._pairings(head + rest)
        head = ((i, ci - 1),) if ci > 1 else ()
        for pos, (j, cj) in enumerate(rest):
            c = C[i, j]
            if c == 0.0:
                continue
            mid = ((j, cj - 1),) if cj > 1 else ()
            total += cj * c * self._pairings(head + rest[:pos] + mid + rest[pos + 1:])
        self._memo[key] = total
        return total

    def integrate(self, poly: Polynomial) -> float:
        return math.fsum(c * self.monomial(m) for m, c in poly.sorted_terms())


def wick_moment(exponents: Sequence[int], C) -> float:
    """``E[prod x_i^k_i]`` under ``N(0, C)``; ``exponents[0]`` belongs to ``x1``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if len(exponents) > C.shape[0]:
        raise DimensionMismatch("more exponents than covariance dimensions")
    mono = tuple((i + 1, int(k)) for i, k in enumerate(exponents) if k)
    if any(k < 0 for _, k in mono):
        raise ValueError("negative exponent")
    return WickMoments(C).monomial(mono)


def _as_polynomial_function(f) -> CylinderFunction:
    if isinstance(f, Polynomial):
        return CylinderFunction(f)
    if not f.is_polynomial:
        raise TypeError("exact conditioning needs a polynomial body; use mc_conditional_expectation")
    return f


def gaussian_conditional_expectation(f, n: int, kernel: CovarianceKernel) -> CylinderFunction:
    """``E[f | x1..xn]`` as a polynomial in ``x1..xn`` (exact).

    Writes the tail as ``tail = A @ head + z`` with ``z ~ N(0, S)``
    independent of the head, ``A = C_th C_hh^-1`` and ``S`` the Schur
    complement, expands, and replaces every ``z`` monomial by its Wick moment.
    """
    f = _as_polynomial_function(f)
    poly = f.polynomial()
    n = int(n)
    if n < 1:
        raise ValueError("levels start at 1")
    m = f.support_level
    if n >= m:
        return CylinderFunction(poly, level=n)
    if poly.degree > WICK_DEGREE_GUARD:
        raise DegreeGuardError(f"degree {poly.degree} exceeds the Wick guard")

    marg = build_marginal(kernel, m)
    C = marg.C
    C_hh, C_ht, C_tt = C[:n, :n], C[:n, n:], C[n:, n:]
    L_h = cholesky_checked(C_hh)
    A = cho_solve((L_h, True), C_ht).T  # (m-n) x n
    S = C_tt - A @ C_ht
    S = 0.5 * (S + S.T)

    mapping = {}
    for t in range(m - n):
        coord = n + 1 + t
        mapping[coord] = Polynomial.linear(A[t]) + Polynomial.variable(coord)
    expanded = poly.substitute(mapping)

    wick = WickMoments(S, offset=n)
    out: dict = {}
    for mono, coeff in expanded.terms.items():
        head = tuple((c, p) for c, p in mono if c <= n)
        tail = tuple((c, p) for c, p in mono if c > n)
        val = coeff * wick.monomial(tail) if tail else coeff
        if val != 0.0:
            out[head] = out.get(head, 0.0) + val
    return CylinderFunction(Polynomial(out), level=n)


def characteristic_value(marginal: GaussianMarginal, xi) -> complex:
    """``exp(-xi^T C xi / 2)``, the Fourier transform of the marginal at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (marginal.n,):
        raise DimensionMismatch(f"expected a vector of length {marginal.n}, got shape {xi.shape}")
    return complex(math.exp(-0.5 * float(xi @ marginal.C @ xi)), 0.0)


def characteristic_value_mc(marginal: GaussianMarginal, xi, samples: int, seed: int) -> tuple:
    """Monte Carlo mean of ``exp(i <x, xi>)`` and its standard error."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (marginal.n,):
        raise DimensionMismatch(f"expected a vector of length {marginal.n}, got shape {xi.shape}")
    phase = sample(marginal, samples, seed) @ xi
    vals = np.exp(1j * phase)
    mean = complex(vals.mean())
    stderr = float(np.sqrt(np.mean(np.abs(vals - mean) ** 2) / samples))
    return mean, stderr


def positivity_check(kernel: CovarianceKernel, xis) -> float:
    """Smallest eigenvalue of ``[chi(xi_j - xi_k)]_jk``."""
    vecs = [np.asarray(v, dtype=float) for v in xis]
    if not 2 <= len(vecs) <= 12:
        raise ValueError("positivity_check takes between 2 and 12 vectors")
    dim = vecs[0].shape
    if len(dim) != 1 or any(v.shape != dim for v in vecs):
        raise DimensionMismatch("all vectors must share one length")
    marg = build_marginal(kernel, dim[0])
    k = len(vecs)
    M = np.empty((k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            M[a, b] = characteristic_value(marg, vecs[a] - vecs[b])
    return float(np.linalg.eigvalsh(M).min())
