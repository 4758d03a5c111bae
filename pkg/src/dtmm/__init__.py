"""Differential transfer matrix solver for linear ODEs with variable coefficients."""

from ._jit import JIT_ENABLED
from .charroots import RootFrame, phase_vector, roots_at, track_frame
from .coeffs import (
    CoeffFn,
    Problem,
    SolverOptions,
    eval_coeffs,
    normalize_form,
    parse_problem,
)
from .errors import (
    ChainingError,
    CoeffDomainError,
    DegeneracyError,
    DTMMError,
    EntirelyDegenerateError,
    NumericFailure,
    OracleConvergenceError,
    ParseError,
    UnsupportedCoefficientError,
)
from .jump import (
    Layer,
    TransferMatrix,
    compose_transfers,
    jump_det,
    jump_matrix,
    layered_transfer,
)
from .linalg import mat_exp, mat_exp_2x2, vandermonde, vandermonde_inverse
from .oracle import CompanionState, companion_rhs, oracle_solve
from .propagate import (
    SingularityReport,
    TransferExponent,
    find_singularities,
    kernel_at,
    propagate_exp,
    propagate_ode,
    propagate_robust,
    singular_jump,
    transfer_det_formula,
)
from .solution import (
    Envelope,
    SolutionGrid,
    fundamental_basis,
    ic_to_envelope,
    reconstruct,
    solve_grid,
    wronskian_abel,
)

__version__ = "0.1.0"
