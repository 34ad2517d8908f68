"""Penalized least-squares model selection for Gaussian linear models.

The variance is unknown and estimated jointly with the mean. The package
provides the Dkhi and Fish functions with their inverses, data-driven and
classical penalties, the usual model collections, exhaustive and
dynamic-programming selectors, a Kullback-loss variant, and the simulation
harness behind the ``gmsel`` command.

Set ``GMSEL_DISABLE_NUMBA=1`` before import to run the pure numpy kernels.
"""

from ._accel import HAS_NUMBA, backend
from .dkhi_fish import (
    dkhi,
    dkhi_mc,
    dkhi_upper,
    edkhi,
    efish,
    fish,
    fish_mc,
    fish_upper,
)
from .errors import (
    BudgetExceededError,
    DivergenceError,
    DomainError,
    HypothesisError,
    NoSolutionError,
    SaturatedFitError,
)
from .estimation import FitRecord, crit_K, crit_K_kullback, crit_L, project
from .families import (
    CollectionSpec,
    ComplexityIndex,
    ModelKey,
    complexity_of,
    count_models,
    enumerate_models,
    sigma_prime,
)
from .kullback import ThetaPair, kl_bias, kl_div, kl_risk_mc, select_kullback
from .numerics import RngStream, solve_monotone
from .penalties import (
    PenaltyRule,
    hka_check,
    pen_classical,
    pen_convert,
    pen_kl,
    pen_kl_upper,
    pen_kullback,
    pen_kullback_upper,
    pen_minimal,
)
from .selectors import (
    SelectionOutcome,
    select_changepoints,
    select_complete,
    select_generic,
    select_in_collection,
    select_nonzero,
    select_ordered,
    select_partition,
)
from .simulate import SimConfig, SimReport, emit_penalty_curve, run_study

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "BudgetExceededError",
    "CollectionSpec",
    "ComplexityIndex",
    "DivergenceError",
    "DomainError",
    "FitRecord",
    "HypothesisError",
    "ModelKey",
    "NoSolutionError",
    "PenaltyRule",
    "RngStream",
    "SaturatedFitError",
    "SelectionOutcome",
    "SimConfig",
    "SimReport",
    "ThetaPair",
    "backend",
    "complexity_of",
    "count_models",
    "crit_K",
    "crit_K_kullback",
    "crit_L",
    "dkhi",
    "dkhi_mc",
    "dkhi_upper",
    "edkhi",
    "efish",
    "emit_penalty_curve",
    "enumerate_models",
    "fish",
    "fish_mc",
    "fish_upper",
    "hka_check",
    "kl_bias",
    "kl_div",
    "kl_risk_mc",
    "pen_classical",
    "pen_convert",
    "pen_kl",
    "pen_kl_upper",
    "pen_kullback",
    "pen_kullback_upper",
    "pen_minimal",
    "project",
    "run_study",
    "select_changepoints",
    "select_complete",
    "select_generic",
    "select_in_collection",
    "select_kullback",
    "select_nonzero",
    "select_ordered",
    "select_partition",
    "sigma_prime",
    "solve_monotone",
]
