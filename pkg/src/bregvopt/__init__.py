"""Interior Bregman gradient method for vector optimization.

Kernels, ordering cones, test problems, the dual step subproblem, merit
functions and a solver whose trajectories are checked against the
convergence inequalities of the method.
"""
from .cone import ConeOrder, canonical_e, make_cone, rescale_smoothness
from .errors import *  # noqa: F401,F403
from .kernels import (
    BurgEntropy,
    Domain,
    LegendreKernel,
    LogBarrier,
    ShannonEntropy,
    SquaredNorm,
    estimate_alpha,
    make_kernel,
)
from .merit import check_ell_ratio, check_merit_sandwich, merit_report, pl_tau, theta, u0_bruteforce
from .problems import (
    VectorProblem,
    builtin_suite,
    check_relative_smoothness,
    check_relative_strong_convexity,
    get_problem,
    register_problem,
)
from .solver import StopRule, limit_point, run, run_certificates
from .subproblem import DualOptions, brute_force_subproblem, solve_dual

__version__ = "0.1.0"
