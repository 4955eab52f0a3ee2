"""Tensor-train linear algebra and alternating solvers for SPD systems."""

from .dense import (
    InputError,
    NumericalError,
    SpectrumBounds,
    extreme_eigenvalues,
    qr_factor,
    solve_spd,
    truncated_svd,
)
from .frames import (
    EnvironmentCache,
    LocalSystem,
    StaleCacheError,
    frame_dense,
    galerkin_correction,
    local_system,
    local_system_two_block,
    tt_round_anorm,
)
from .io import load, save
from .problems import (
    ExperimentResult,
    ProblemSpec,
    dense_oracle_solve,
    laplacian_tt,
    ones_tt,
    random_rhs_tt,
    run_experiment,
)
from .solvers import (
    SolverConfig,
    StepReport,
    als_sweep,
    amen_sweep,
    approximate_residual,
    dense_sd_step,
    dmrg_sweep,
    energy,
    greedy_step,
    nongreedy_step,
    residual_norm,
    sd2_step,
    solve,
)
from .trace import ConvergenceTrace, TraceEvent
from .tt import (
    TtMatrix,
    TtVector,
    evaluate,
    identity_matrix,
    interfaces,
    mat_to_dense,
    orthogonalize,
    to_dense,
    tt_add,
    tt_dot,
    tt_from_dense,
    tt_matvec,
    tt_norm,
    tt_ones,
    tt_random,
    tt_round,
    tt_scale,
    tt_zero,
)

__version__ = "0.1.0"
