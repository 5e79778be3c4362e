"""Global minimization of a quadratic over a ball by dual bisection."""

from .dual import (
    KktReport,
    ProblemInstance,
    duality_gap,
    eval_dual,
    eval_psi,
    eval_psi_derivs,
    kkt_report,
    primal_value,
    recover_primal,
)
from .errors import (
    CapViolationError,
    ConvergenceError,
    DimensionError,
    LanczosBreakdownError,
    NegativeCurvatureError,
    OracleLimitError,
    ParseError,
    PoleProximityError,
    SolverError,
    SphereQPError,
    ValidationError,
)
from .linalg import ProbeResult, SpectralEstimate, SymMatrix, lanczos_smallest, psi_probe, shifted_solve
from .problems import GenSpec, gen_general, gen_hard, read_instance, write_instance, write_solution
from .solver import (
    Case,
    Solution,
    SolverConfig,
    accuracy_for_alpha,
    bisect,
    bracket,
    classify_and_perturb,
    perturbation_bound,
    perturbation_distance_bound,
    solve,
    solve_with_p,
)

__version__ = "0.1.0"
