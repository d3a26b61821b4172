"""Iterated implicit stochastic Taylor methods.

Exact tree-indexed series algebra for implicit Taylor schemes and their
Newton-type iterations, growth functions with iteration-count formulas, and
a Monte Carlo harness reproducing the strong/weak convergence and
mean-square stability behavior of the shipped schemes.
"""

from .algebra import (
    WeightMap,
    compose,
    exact_method_weights,
    generic_weights,
    inverse,
    iterate_full_newton,
    iterate_modified_newton,
    iterate_simple,
    psi_weight,
    star,
    unit_e,
)
from .growth import (
    ImplicitnessClass,
    IterationKind,
    growth,
    iteration_table,
    iterations_needed,
    max_growth,
    minimal_order_for_growth,
    weak_growth,
)
from .harness import (
    ExperimentResult,
    PathIncrements,
    ReferenceConfig,
    aggregate,
    estimate_order,
    mc_stability_growth,
    ms_stability_factor,
    sample_increments,
    sample_path_increments,
    strong_convergence_experiment,
    van_der_pol_demo,
    weak_convergence_experiment,
)
from .problems import SDEProblem, coupled_2d, gbm, get_problem, scalar_nonlinear, van_der_pol
from .schemes import (
    SchemeSpec,
    StochasticIncrements,
    elementary_differential,
    eval_explicit_part,
    eval_implicit_part,
    implicit_jacobian,
    make_scheme,
    one_step_bseries_check,
    parse_scheme,
)
from .solvers import PathResult, SolveConfig, integrate_path, solve_step
from .trees import EMPTY, FTree, Tree, alpha, enumerate_trees, leaf, node, rho

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
