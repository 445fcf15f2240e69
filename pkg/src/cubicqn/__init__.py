"""Cubic-regularized quasi-Newton methods for smooth convex problems."""

from .cubic_step import (
    CubicStepResult,
    EstimatingSequenceState,
    estseq_minimize,
    solve_dense,
    solve_low_rank,
    solve_step,
)
from .dataio import Dataset, RawDataset, load_libsvm, normalize_rows, parse_libsvm, synth_logistic
from .hessian_models import (
    LowRankHessianModel,
    PairBuffer,
    build_history_model,
    build_sampling_model,
    broyden_apply_pair,
    lbfgs_apply_pair,
    lsr1_apply_pair,
)
from .oracle import LogisticProblem, QuadraticProblem, check_derivatives
from .solvers import (
    SolverConfig,
    SolverError,
    SolverTrace,
    adaptive_accelerated_crn,
    adaptive_inexact_crn,
    alt_adaptive_cubic,
    baseline_classical_lbfgs,
    baseline_classical_lsr1,
    baseline_damped_newton,
    baseline_exact_crn,
    baseline_gd,
)

__version__ = "0.1.0"
