"""Weighted pseudorandom generators and space-efficient expectation estimates for regular ROBPs.

Exact rational linear algebra lives in :mod:`regwprg.ratlin`; programs in
:mod:`regwprg.robp`; the level-k recursion in :mod:`regwprg.approx`; the two
approximation notions in :mod:`regwprg.weights` and :mod:`regwprg.svapprox`;
the generator in :mod:`regwprg.wprg`; and the generalized recursion and the
estimator in :mod:`regwprg.spacerec`.
"""

from .approx import EpsSchedule, ExactProvider, bs_intervals, delta_identity_residual, level_matrix
from .providers import PerturbedProvider, PrgBackedProvider, RoundedProvider, make_provider
from .robp import (
    NotRegularError,
    RegularROBP,
    brute_expectation,
    gen_regular,
    load_program,
    parity_program,
    rw_matrix,
    save_program,
)
from .spacerec import (
    base_factorization,
    estimate_expectation,
    lca,
    level_matrix_general,
    newrec_matrix,
    richardson_check,
)
from .svapprox import mixing_gap, sv_error
from .weights import total_weight, weight_approx_error
from .wprg import BaseGenerator, build_wprg, enum_term, eval_wprg, expand, wprg_output

__version__ = "0.1.0"

__all__ = [
    "BaseGenerator",
    "EpsSchedule",
    "ExactProvider",
    "NotRegularError",
    "PerturbedProvider",
    "PrgBackedProvider",
    "RegularROBP",
    "RoundedProvider",
    "base_factorization",
    "brute_expectation",
    "bs_intervals",
    "build_wprg",
    "delta_identity_residual",
    "enum_term",
    "estimate_expectation",
    "eval_wprg",
    "expand",
    "gen_regular",
    "lca",
    "level_matrix",
    "level_matrix_general",
    "load_program",
    "make_provider",
    "mixing_gap",
    "newrec_matrix",
    "parity_program",
    "richardson_check",
    "rw_matrix",
    "save_program",
    "sv_error",
    "total_weight",
    "weight_approx_error",
    "wprg_output",
]
