"""
Uniqueness certificates and robustness bounds for l1-synthesis and l1-analysis recovery
"""
from .certify import (
    MARGINAL,
    NOT_UNIQUE,
    UNIQUE,
    ConditionReport,
    DualCertificate,
    ProblemInstance,
    SupportPattern,
    check_kernel_condition,
    find_certificate,
    verify_condition1,
    verify_condition1_prime,
)
from .compare import eval_condition2, eval_condition3, eval_condition4_IC, eval_condition5_RC, implication_tests
from .config import DEFAULT_TOLERANCES, Settings, Tolerances
from .constants import RobustnessConstants, r_of_J, rho_tau, robustness_constants, thm2_bounds, thm3_bound
from .errors import L1CertError
from .instances import InstanceGenerator, load_fixture, load_instance, save_instance
from .solvers import solve_bp, solve_bpdn, solve_lasso, uniqueness_oracle

__version__ = "0.1.0"
