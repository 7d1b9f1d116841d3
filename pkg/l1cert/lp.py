"""
Linear programming for the infinity-norm certificate programs.

Every LP in the package goes through solve_linear_program, a HiGHS wrapper that
reduces the equality rows to an orthonormal full-row-rank system first. Range
infeasibility of the equality system is decided by that reduction, so an
Infeasible result always comes with a vector q satisfying A^T q = 0, q^T b > 0.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla
from scipy.optimize import linprog

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import InvalidInputError, NotConvergedError, UnboundedError
from .linalg import as_matrix, as_vector, default_rank_tol

logger = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"

HIGHS_METHOD = "highs-ds"


@dataclass(frozen=True)
class LinearProgramResult:
    """Outcome of min c^T x s.t. A_eq x = b_eq, A_ub x <= b_ub, bounds"""
    status: str
    x: Optional[np.ndarray]
    value: float
    eq_duals: Optional[np.ndarray]
    dual_objective: float
    duality_gap: float
    iterations: int = 0
    certificate: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class LpSolution:
    """Solution of an infinity-norm program; p solves the dual max <p, u1> s.t. ||A^T p||_1 <= 1"""
    u: Optional[np.ndarray]
    value: float
    p: Optional[np.ndarray]
    status: str
    duality_gap: float
    certificate: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _reduce_equalities(A: np.ndarray, b: np.ndarray, tol: Tolerances):
    """Replace A x = b by an orthonormal-row system; returns (A_red, b_red, back_map, residual)"""
    rows, cols = A.shape
    if rows == 0:
        return np.zeros((0, cols)), np.zeros(0), np.zeros((0, 0)), np.zeros(0)

    U, s, Vt = sla.svd(A, full_matrices=False)
    rank_tol = tol.rank_tol if tol.rank_tol is not None else default_rank_tol(A)
    r = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0

    Ur = U[:, :r]
    residual = b - Ur @ (Ur.T @ b)
    A_red = Vt[:r]
    b_red = (Ur.T @ b) / s[:r]
    # d(value)/d(b) = Ur diag(1/s) d(value)/d(b_red)
    back_map = Ur / s[:r]
    return A_red, b_red, back_map, residual


def _bounds_dual_term(res, bounds: Sequence[Tuple[Optional[float], Optional[float]]]) -> float:
    total = 0.0
    lower = np.asarray(res.lower.marginals)
    upper = np.asarray(res.upper.marginals)
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and np.isfinite(lo):
            total += lo * lower[i]
        if hi is not None and np.isfinite(hi):
            total += hi * upper[i]
    return float(total)


def solve_linear_program(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
                         bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]] = None,
                         tolerances: Tolerances = DEFAULT_TOLERANCES) -> LinearProgramResult:
    """
    Solve min c^T x subject to equality, inequality and bound constraints with HiGHS.

    Args:
        c: Objective vector
        A_eq, b_eq: Equality system (may be rank deficient)
        A_ub, b_ub: Inequality system
        bounds: Per-variable (low, high) pairs, None for unbounded; defaults to free variables
        tolerances: Tolerance set (feas_tol drives range infeasibility and solver feasibility)

    Returns:
        LinearProgramResult with equality duals mapped back to the original rows
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    nvar = c.size
    if bounds is None:
        bounds = [(None, None)] * nvar
    if len(bounds) != nvar:
        raise InvalidInputError(f"bounds has {len(bounds)} entries, expected {nvar}")

    if A_eq is None:
        A_eq = np.zeros((0, nvar))
        b_eq = np.zeros(0)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, nvar)
    b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
    if A_eq.shape[0] != b_eq.size:
        raise InvalidInputError(f"A_eq has {A_eq.shape[0]} rows but b_eq has {b_eq.size} entries")

    A_red, b_red, back_map, residual = _reduce_equalities(A_eq, b_eq, tolerances)
    scale = 1.0 + (float(np.max(np.abs(b_eq))) if b_eq.size else 0.0)
    if residual.size and float(np.max(np.abs(residual))) > tolerances.feas_tol * scale:
        logger.debug(f"Equality system inconsistent: range residual {np.max(np.abs(residual)):.3e}")
        return LinearProgramResult(
            status=INFEASIBLE, x=None, value=float("inf"), eq_duals=None,
            dual_objective=float("inf"), duality_gap=float("nan"), certificate=residual,
        )

    kwargs = {}
    if A_red.shape[0]:
        kwargs["A_eq"] = A_red
        kwargs["b_eq"] = b_red
    if A_ub is not None and np.asarray(A_ub).size:
        kwargs["A_ub"] = np.asarray(A_ub, dtype=float).reshape(-1, nvar)
        kwargs["b_ub"] = np.asarray(b_ub, dtype=float).reshape(-1)

    options = {
        "primal_feasibility_tolerance": min(1e-10, tolerances.feas_tol),
        "dual_feasibility_tolerance": min(1e-10, tolerances.feas_tol),
        "presolve": True,
    }
    res = linprog(c, bounds=list(bounds), method=HIGHS_METHOD, options=options, **kwargs)
    iterations = int(getattr(res, "nit", 0) or 0)

    if res.status == 2:
        return LinearProgramResult(INFEASIBLE, None, float("inf"), None, float("inf"),
                                   float("nan"), iterations)
    if res.status == 3:
        return LinearProgramResult(UNBOUNDED, None, float("-inf"), None, float("-inf"),
                                   float("nan"), iterations)
    if res.status != 0:
        logger.debug(f"linprog stopped with status {res.status}: {res.message}")
        raise NotConvergedError(
            f"LP solver did not converge: {res.message}",
            result=res,
            diagnostics={"status": int(res.status), "iterations": iterations},
        )

    x = np.asarray(res.x, dtype=float)
    value = float(c @ x)

    dual = _bounds_dual_term(res, bounds)
    if "b_eq" in kwargs:
        red_duals = np.asarray(res.eqlin.marginals, dtype=float)
        dual += float(b_red @ red_duals)
        eq_duals = back_map @ red_duals
    else:
        eq_duals = np.zeros(A_eq.shape[0])
    if "b_ub" in kwargs:
        dual += float(kwargs["b_ub"] @ np.asarray(res.ineqlin.marginals, dtype=float))

    gap = abs(value - dual)
    logger.debug(f"LP solved: {nvar} vars, value {value:.15g}, gap {gap:.3e}, {iterations} iterations")
    return LinearProgramResult(OPTIMAL, x, value, eq_duals, dual, gap, iterations)


def _check_partition(cols: int, free_idx, boxed_idx):
    free = sorted(int(i) for i in free_idx)
    boxed = sorted(int(i) for i in boxed_idx)
    if sorted(free + boxed) != list(range(cols)):
        raise InvalidInputError(
            f"free_idx {free} and boxed_idx {boxed} must partition the {cols} columns"
        )
    return free, boxed


def solve_inf_norm_box(A, u1, free_idx: Sequence[int], boxed_idx: Sequence[int],
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> LpSolution:
    """
    Minimize max_{i in free_idx} |u_i| subject to A u = u1 and |u_k| <= 1 on boxed_idx.

    Solved as the LP min t s.t. -t <= u_i <= t (i free), A u = u1, u_k in [-1, 1].
    """
    A = as_matrix(A, "A")
    u1 = as_vector(u1, "u1")
    rows, cols = A.shape
    if rows != u1.size:
        raise InvalidInputError(f"A has {rows} rows but u1 has {u1.size} entries")
    free, boxed = _check_partition(cols, free_idx, boxed_idx)

    nvar = cols + 1
    c = np.zeros(nvar)
    c[-1] = 1.0
    A_eq = np.hstack([A, np.zeros((rows, 1))])

    A_ub = np.zeros((2 * len(free), nvar))
    for k, i in enumerate(free):
        A_ub[2 * k, i] = 1.0
        A_ub[2 * k, -1] = -1.0
        A_ub[2 * k + 1, i] = -1.0
        A_ub[2 * k + 1, -1] = -1.0
    b_ub = np.zeros(2 * len(free))

    bounds = [(None, None)] * cols + [(0.0, None)]
    for k in boxed:
        bounds[k] = (-1.0, 1.0)

    res = solve_linear_program(c, A_eq, u1, A_ub, b_ub, bounds, tolerances)
    if res.status == INFEASIBLE:
        logger.debug(f"Infinity-norm program infeasible ({rows}x{cols}, {len(boxed)} boxed)")
        return LpSolution(None, float("inf"), None, INFEASIBLE, float("nan"), res.certificate)
    if res.status == UNBOUNDED:
        # t >= 0 bounds the objective below, so this indicates a solver fault
        raise NotConvergedError("Infinity-norm program reported unbounded")

    u = res.x[:cols]
    value = float(np.max(np.abs(u[free]))) if free else 0.0

    feas = float(np.max(np.abs(A @ u - u1))) if rows else 0.0
    scale = 1.0 + (float(np.max(np.abs(u1))) if rows else 0.0)
    if feas > 10 * tolerances.feas_tol * scale:
        raise NotConvergedError(
            f"Infinity-norm solution violates A u = u1 by {feas:.3e}",
            result=u,
            diagnostics={"feasibility": feas, "duality_gap": res.duality_gap},
        )
    return LpSolution(u, value, res.eq_duals, OPTIMAL, res.duality_gap)


def solve_inf_norm_eq(A, u1, tolerances: Tolerances = DEFAULT_TOLERANCES) -> LpSolution:
    """Minimize ||u||_inf subject to A u = u1"""
    A = as_matrix(A, "A")
    cols = A.shape[1]
    return solve_inf_norm_box(A, u1, range(cols), [], tolerances)


def dual_value(A, a, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """
    Optimal value of max <p, a> subject to ||A^T p||_1 <= 1.

    Raises:
        UnboundedError: when the maximum is +inf (the primal min ||u||_inf, A u = a is infeasible)
    """
    A = as_matrix(A, "A")
    a = as_vector(a, "a")
    rows, cols = A.shape
    if rows != a.size:
        raise InvalidInputError(f"A has {rows} rows but a has {a.size} entries")
    if rows == 0:
        return 0.0

    # variables (p, s): -s <= A^T p <= s, sum(s) <= 1
    nvar = rows + cols
    c = np.concatenate([-a, np.zeros(cols)])
    At = A.T
    I = np.eye(cols)
    A_ub = np.vstack([
        np.hstack([At, -I]),
        np.hstack([-At, -I]),
        np.concatenate([np.zeros(rows), np.ones(cols)]).reshape(1, -1),
    ])
    b_ub = np.concatenate([np.zeros(2 * cols), [1.0]])
    bounds = [(None, None)] * rows + [(0.0, None)] * cols

    res = solve_linear_program(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, tolerances=tolerances)
    if res.status == UNBOUNDED:
        raise UnboundedError("Dual program is unbounded (primal infeasible)")
    if res.status != OPTIMAL:
        raise NotConvergedError(f"Dual program ended with status {res.status}")
    return float(-res.value)
