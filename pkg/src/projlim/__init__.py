"""Integration over projective limits of probability measures.

Finite-dimensional marginals of a chain of levels, conditional expectations
down the chain, limit integrals as stabilising nets, and their Gaussian and
lattice free-field instances.
"""
from .diagram import (
    ConsistencyReport,
    ProjectiveChain,
    Restriction,
    ScalarNet,
    check_chain_consistency,
    co_cauchy_check,
    family_equivalence,
    net_limit,
)
from .discrete import (
    FiniteProductSystem,
    TableFunction,
    brute_force_integral,
    discrete_conditional_expectation,
    verify_tower,
)
from .gaussian import (
    CovarianceKernel,
    GaussianMarginal,
    build_marginal,
    characteristic_value,
    characteristic_value_mc,
    density,
    gaussian_conditional_expectation,
    positivity_check,
    sample,
    wick_moment,
)
from .integration import (
    CoCauchyFamily,
    ConvergenceTable,
    IntegralEstimate,
    conditional_sequence,
    exact_polynomial_integral,
    lp_norm,
    mc_integral,
    projective_limit_integral,
)
from .polynomial import CylinderFunction, Polynomial, cylinder, evaluate, pullback, x
from .qft import (
    InteractionSpec,
    LatticeSpec,
    free_covariance,
    perturbative_oracle,
    schwinger_free,
    schwinger_interacting,
)

__version__ = "0.1.0"
