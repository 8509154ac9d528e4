"""Acceptance suite: each test prints one PASS/FAIL line and asserts at the stated tolerance."""
import json
import math
import re

import numpy as np
import pytest

from projlim import cli
from projlim.discrete import FiniteProductSystem, TableFunction, discrete_conditional_expectation, discrete_lp_norm
from projlim.gaussian import (
    CovarianceKernel,
    build_marginal,
    gaussian_conditional_expectation,
    positivity_check,
    wick_moment,
)
from projlim.integration import exact_polynomial_integral, lp_norm, mc_integral, projective_limit_integral
from projlim.polynomial import Polynomial, cylinder, pullback
from projlim.qft import (
    InteractionSpec,
    LatticeSpec,
    free_covariance,
    schwinger_free,
    schwinger_interacting,
    schwinger_permutation_sum,
)

from conftest import ACCEPTANCE_LINES, random_polynomial, random_spd, random_spd_kernel

BATTERY_SEED = 7_031


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def battery():
    """25 random polynomial cylinder functions (level <= 4, degree <= 6) with random 8x8 SPD kernels."""
    rng = np.random.default_rng(BATTERY_SEED)
    cases = []
    for _ in range(25):
        level = int(rng.integers(1, 5))
        degree = int(rng.integers(1, 7))
        cases.append((random_spd_kernel(8, rng), random_polynomial(rng, level, degree)))
    return cases


def test_limit_integral_stabilises_at_support_level(battery):
    worst_row, worst_verdict = 0.0, 0.0
    for kernel, p in battery:
        level = p.support_level
        table = projective_limit_integral(cylinder(p), kernel, 1e-12, 3, 8)
        exact = exact_polynomial_integral(p, build_marginal(kernel, level)).value
        tail = [est.value for n, est in table.rows if n >= level]
        worst_row = max(worst_row, max(tail) - min(tail))
        gap = math.inf if table.value is None else abs(table.value - exact)
        worst_verdict = max(worst_verdict, gap)
    report("limit integral stabilisation", worst_row <= 1e-12 and worst_verdict <= 1e-12,
           f"row spread {worst_row:.2e}, verdict gap {worst_verdict:.2e} (tol 1e-12, 25 cases)")


def test_pullback_is_an_isometry(battery):
    worst = 0.0
    for kernel, p in battery:
        f = cylinder(p)
        base = lp_norm(f, build_marginal(kernel, f.level), 2)
        for m in range(f.level + 1, 9):
            worst = max(worst, abs(lp_norm(pullback(f, m), build_marginal(kernel, m), 2) - base))
    report("pullback isometry", worst <= 1e-10, f"max norm gap {worst:.2e} up to level 8 (tol 1e-10)")


def _gaussian_law_gaps(rng):
    kernel = random_spd_kernel(6, rng)
    level = int(rng.integers(2, 5))
    f = random_polynomial(rng, level, 4)
    g = random_polynomial(rng, level, 4)
    a, b = rng.uniform(-2, 2, size=2)
    n = int(rng.integers(1, level))
    m = int(rng.integers(n, level + 1))
    E = lambda h, k: gaussian_conditional_expectation(h if hasattr(h, "poly") else cylinder(h), k, kernel)
    en = E(f, n)
    tower = E(E(f, m), n).poly.max_coefficient_gap(en.poly)
    idem = E(en, n).poly.max_coefficient_gap(en.poly)
    lin = E(a * f + b * g, n).poly.max_coefficient_gap(a * en.poly + b * E(g, n).poly)
    marg = build_marginal(kernel, level)
    contraction = max(lp_norm(en, marg, q) - lp_norm(cylinder(f), marg, q) for q in (2, 4))
    return max(tower, idem, lin, max(contraction, 0.0))


def _random_system(rng):
    sizes = [int(rng.integers(2, 5)) for _ in range(8)]
    while math.prod(sizes) > 1 << 16:
        sizes.pop()
    weights = []
    for k in sizes:
        w = rng.dirichlet(np.ones(k))
        w[-1] = 1.0 - math.fsum(w[:-1])
        weights.append(w)
    return FiniteProductSystem(sizes, weights)


def _discrete_law_gaps(rng):
    system = _random_system(rng)
    top = system.max_level
    f = TableFunction(rng.uniform(-1, 1, size=system.alphabet_sizes))
    g = TableFunction(rng.uniform(-1, 1, size=system.alphabet_sizes))
    a, b = rng.uniform(-2, 2, size=2)
    n = int(rng.integers(1, top))
    m = int(rng.integers(n, top + 1))
    E = lambda h, k: discrete_conditional_expectation(h, k, system)
    en = E(f, n)
    tower = np.abs(E(E(f, m), n).table - en.table).max()
    idem = np.abs(E(en, n).table - en.table).max()
    lin = np.abs(E(TableFunction(a * f.table + b * g.table), n).table - (a * en.table + b * E(g, n).table)).max()
    contraction = max(discrete_lp_norm(en, system, top, q) - discrete_lp_norm(f, system, top, q) for q in (1, 2, 4))
    return max(tower, idem, lin, max(contraction, 0.0))


def test_conditional_expectation_laws():
    rng = np.random.default_rng(BATTERY_SEED + 1)
    gauss = max(_gaussian_law_gaps(rng) for _ in range(50))
    disc = max(_discrete_law_gaps(rng) for _ in range(10))
    report("conditional expectation laws", gauss <= 1e-9 and disc <= 1e-14,
           f"gaussian {gauss:.2e} (tol 1e-9, 50 cases), discrete {disc:.2e} (tol 1e-14, 10 systems)")


def test_conditional_approximation_converges(battery):
    bad = []
    for i, (kernel, p) in enumerate(battery):
        f = cylinder(p)
        marg = build_marginal(kernel, f.level)
        dists = [lp_norm(pullback(gaussian_conditional_expectation(f, n, kernel), f.level) - f, marg, 2)
                 for n in range(1, f.level + 1)]
        if any(b > a + 1e-10 for a, b in zip(dists, dists[1:])) or dists[-1] != 0.0:
            bad.append(i)
    report("conditional approximation convergence", not bad,
           f"{25 - len(bad)}/25 members monotone and zero at their support level")


def test_wick_pairings():
    rng = np.random.default_rng(BATTERY_SEED + 2)
    kernel = free_covariance(LatticeSpec(d=1, sites_per_dim=5, m=0.8))
    perm_gap = 0.0
    for k in (2, 4, 6):
        for _ in range(5):
            fs = rng.standard_normal((k, 5))
            perm_gap = max(perm_gap, abs(schwinger_free(fs, kernel) - schwinger_permutation_sum(fs, kernel)))
    odd = all(schwinger_free(rng.standard_normal((k, 5)), kernel) == 0.0 for k in (1, 3, 5, 7, 9, 11))
    odd = odd and all(wick_moment(e, np.eye(3)) == 0.0 for e in ([1, 0, 0], [1, 1, 1], [3, 2, 0]))
    mc_fail = 0
    for case in range(20):
        C = random_spd(3, rng)
        exps = [int(e) for e in rng.integers(0, 3, size=3)]
        if sum(exps) % 2:
            exps[0] += 1
        p = Polynomial.monomial(exps)
        est = mc_integral(p, build_marginal(CovarianceKernel.from_matrix(C), 3), 1_000_000, seed=case)
        if est.stderr and abs(est.value - wick_moment(exps, C)) > 5 * est.stderr:
            mc_fail += 1
    report("wick pairing sum", perm_gap <= 1e-10 and odd and mc_fail == 0,
           f"permutation gap {perm_gap:.2e} (tol 1e-10), odd k exact zero: {odd}, "
           f"MC outside 5 stderr: {mc_fail}/20")


def test_characteristic_function_positivity():
    rng = np.random.default_rng(BATTERY_SEED + 3)
    lattices = [LatticeSpec(d=1, sites_per_dim=6, m=0.5), LatticeSpec(d=2, sites_per_dim=3, m=1.0)]
    worst = math.inf
    for trial in range(100):
        if trial % 2:
            kernel = free_covariance(lattices[trial % 4 // 2])
            dim = kernel.max_level
        else:
            dim = int(rng.integers(1, 7))
            kernel = random_spd_kernel(dim, rng)
        size = int(rng.integers(2, 9))
        xis = list(rng.uniform(-2, 2, size=(size, dim)))
        worst = min(worst, positivity_check(kernel, xis))
    report("characteristic function positivity", worst >= -1e-10,
           f"min eigenvalue {worst:.2e} over 100 subsets (tol -1e-10)")


def test_lattice_covariance():
    two = free_covariance(LatticeSpec(d=1, sites_per_dim=2, m=1.0, a=1.0)).matrix(2)
    gap = np.abs(two - [[0.6, 0.4], [0.4, 0.6]]).max()
    rows = 0.0
    for d, n, m, a in [(1, 2, 1.0, 1.0), (1, 8, 0.5, 1.0), (1, 5, 2.0, 0.5), (2, 4, 1.0, 1.0), (2, 6, 0.3, 1.0)]:
        lat = LatticeSpec(d=d, sites_per_dim=n, a=a, m=m)
        inv = np.linalg.inv(free_covariance(lat).matrix(lat.sites))
        rows = max(rows, np.abs(inv.sum(axis=1) - m ** 2).max())
    report("lattice covariance", gap <= 1e-12 and rows <= 1e-10,
           f"two-site gap {gap:.2e} (tol 1e-12), inverse row-sum gap {rows:.2e} (tol 1e-10)")


def test_interacting_single_mode():
    lam = 0.01
    target = (1 - 15 * lam) / (1 - 3 * lam)
    fs = [[1.0], [1.0]]
    kernel = CovarianceKernel.identity()
    est = schwinger_interacting(fs, InteractionSpec.local_power(lam, 4, [0]), kernel, samples=1_000_000, seed=2024)
    bound = max(5 * est.stderr, 5e-4)
    gap = abs(est.value - target)
    free = schwinger_interacting(fs, InteractionSpec.local_power(0.0, 4, [0]), kernel, samples=1_000_000, seed=2025)
    free_ok = abs(free.value - schwinger_free(fs, kernel)) <= 4 * free.stderr
    report("interacting single mode", gap <= bound and free_ok,
           f"estimate {est.value:.5f} +- {est.stderr:.5f} vs first-order {target:.5f}: gap {gap:.4f} "
           f"(bound {bound:.4f}); zero coupling matches free: {free_ok}")


def _result_bytes(path):
    return re.sub(rb'\n\s*"timestamp": "[^"]*",?', b"", path.read_bytes())


def test_seeded_runs_are_byte_identical(tmp_path):
    configs = {
        "converge": {"kernel": {"type": "identity"}, "horizon": 4, "window": 2, "tol": 1e-3,
                     "integrand": {"exp_polynomial": [{"coeff": 1.0, "exponents": [2, 0, 0]},
                                                      {"coeff": 1.0, "exponents": [0, 0, 2]}]},
                     "samples": 100_000, "seed": 17},
        "schwinger": {"kernel": {"type": "lattice", "d": 1, "n": 4, "m": 1.0},
                      "test_functions": [[1, 0, 0, 0], [0, 1, 0, 0]],
                      "interaction": {"lambda": 0.05, "sites": [0, 1, 2, 3]}, "samples": 200_000, "seed": 5},
    }
    differing = []
    for name, cfg in configs.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}-{run}"
            cli.main([name, "-c", str(path), "-o", str(out)])
            blobs.append(_result_bytes(out / "result.json"))
            if name == "converge":
                blobs[-1] += (out / "table.csv").read_bytes()
        if blobs[0] != blobs[1]:
            differing.append(name)
    report("seeded determinism", not differing, f"identical result files for {sorted(configs)}; differing: {differing}")
