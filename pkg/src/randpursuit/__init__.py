"""Gradient-free convex optimization by random pursuit.

Line-search descent along random directions with either a fixed sampling
metric or a variable metric learned online by randomized rank-one Hessian
estimation, plus the closed-form convergence theory and a seeded benchmark
harness for both.

Hot loops run through a small compiled extension when it is available; set
RANDPURSUIT_PURE_PYTHON=1 to force the pure numpy implementation.  The
active choice is exposed as `kernel_backend`.
"""

from ._kernels import BACKEND as kernel_backend
from .bench import (ExperimentConfig, ObjectiveInstance, TrialSummary,
                    make_f1, make_f2, make_f3, make_f4, make_gi,
                    run_experiment, transform_instance)
from .hessian import (CurvatureStore, HessianEstimate, curvature_fd,
                      sherman_morrison_inverse, smallest_eigvec,
                      update_corr, update_plain, update_store)
from .linesearch import (AdaptiveStepState, LineSearchResult, adaptive_es,
                         bisection_relative, exact_quadratic,
                         make_line_search)
from .metric import (NotPositiveDefiniteError, PDMatrix, SymmetricMatrix,
                     alignment_factor, condition_exact, condition_trace,
                     eig_extremes, generalized_eig_extremes, pd_check,
                     quad_norm_sq, rank1_pd_criterion)
from .pursuit import PursuitError, StopCriteria, Trajectory, run_frp, run_vrp
from .sampling import (Direction, SeededRng, estimate_moments, haar_rotation,
                       moment_identities, sample_from_precision,
                       sample_normalized)
from .theory import (RheState, condition_transfer_bound, convex_gap_bound,
                     rate_bound_relaxed, rate_bound_uniform, rate_factor_at,
                     rhe_constants, rhe_diagonalization,
                     rhe_exact_expectation, rhe_markov_bound,
                     rhe_recurrence_matrix)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveStepState", "CurvatureStore", "Direction", "ExperimentConfig",
    "HessianEstimate", "LineSearchResult", "NotPositiveDefiniteError",
    "ObjectiveInstance", "PDMatrix", "PursuitError", "RheState", "SeededRng",
    "StopCriteria", "SymmetricMatrix", "Trajectory", "TrialSummary",
    "adaptive_es", "alignment_factor", "bisection_relative",
    "condition_exact", "condition_trace", "condition_transfer_bound",
    "convex_gap_bound", "curvature_fd", "eig_extremes", "estimate_moments",
    "exact_quadratic", "generalized_eig_extremes", "haar_rotation",
    "kernel_backend", "make_f1", "make_f2", "make_f3", "make_f4", "make_gi",
    "make_line_search", "moment_identities", "pd_check", "quad_norm_sq",
    "rank1_pd_criterion", "rate_bound_relaxed", "rate_bound_uniform",
    "rate_factor_at", "rhe_constants", "rhe_diagonalization",
    "rhe_exact_expectation", "rhe_markov_bound", "rhe_recurrence_matrix",
    "run_experiment", "run_frp", "run_vrp", "sample_from_precision",
    "sample_normalized", "sherman_morrison_inverse", "smallest_eigvec",
    "transform_instance", "update_corr", "update_plain", "update_store",
]
