"""
Competing sufficient conditions for uniqueness and the implications between them.

  Condition 2: least-squares certificate  ||(Q^T Psi_J)^+ Q^T Psi_I s||_inf < 1
  Condition 3: injectivity of Phi on span{Psi_hat_i : |y_i| > t}
  Condition 4: identifiability criterion IC(s) < 1
  Condition 5: sign-independent robustness criterion RC(I) < 1

Here J is the cosupport, s the sign vector on the support and Q a basis of Ker(Phi).
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from .certify import (
    UNIQUE,
    ConditionReport,
    ProblemInstance,
    SupportPattern,
    check_kernel_condition,
    verify_condition1,
    verify_condition1_prime,
)
from .config import DEFAULT_SEED, DEFAULT_TOLERANCES, Tolerances
from .errors import (
    AssumptionViolationError,
    InvalidInputError,
    KernelConditionError,
    UnsupportedError,
)
from .linalg import (
    as_matrix,
    as_vector,
    default_rank_tol,
    nullspace_basis,
    numerical_rank,
    pseudo_inverse,
    range_basis,
    spectral_norm,
    subspace_metrics,
)
from .lp import solve_inf_norm_eq

logger = logging.getLogger(__name__)

RC_VERTEX_BUDGET = 20
RC_SAMPLES = 4096
DEFAULT_T_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


def _json_float(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


@dataclass(frozen=True)
class Condition2Result:
    holds: bool
    value: float
    rank_ok: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"holds": self.holds, "value": _json_float(self.value), "rank_ok": self.rank_ok}


@dataclass(frozen=True)
class Condition3Result:
    holds: bool
    I_t: Tuple[int, ...]
    t: float

    def to_dict(self) -> Dict[str, Any]:
        return {"holds": self.holds, "I_t": list(self.I_t), "t_used": self.t}


@dataclass(frozen=True)
class Condition4Result:
    holds: bool
    ic: float
    omega: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "ic": _json_float(self.ic),
            "omega": None if self.omega is None else self.omega.tolist(),
        }


@dataclass(frozen=True)
class Condition5Result:
    holds: bool
    rc: float
    c_J: float
    vertices_evaluated: int = 0

    def suggested_lambda(self, noise_norm: float, rho_factor: float = 2.0) -> Optional[float]:
        """lambda = rho ||w||_2 c_J / (2 (1 - RC)); None when RC >= 1"""
        if noise_norm < 0:
            raise InvalidInputError(f"noise_norm must be non-negative, got {noise_norm}")
        if not rho_factor > 1:
            raise InvalidInputError(f"rho_factor must exceed 1, got {rho_factor}")
        if not self.rc < 1.0:
            return None
        return rho_factor * noise_norm * self.c_J / (2.0 * (1.0 - self.rc))

    def to_dict(self, noise_norm: Optional[float] = None) -> Dict[str, Any]:
        out = {
            "holds": self.holds,
            "rc": _json_float(self.rc),
            "c_J": _json_float(self.c_J),
            "vertices_evaluated": self.vertices_evaluated,
        }
        out["suggested_lambda"] = (
            self.suggested_lambda(noise_norm) if noise_norm is not None and np.isfinite(self.rc) else None
        )
        return out


@dataclass(frozen=True)
class ComparisonReport:
    cond2: Condition2Result
    cond3: Condition3Result
    cond4: Condition4Result
    cond5: Condition5Result
    condition1: Optional[ConditionReport] = None
    violations: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self, noise_norm: Optional[float] = None) -> Dict[str, Any]:
        return {
            "condition1": None if self.condition1 is None else {
                "verdict": self.condition1.verdict,
                "lp_value": _json_float(self.condition1.lp_value),
                "kernel_ok": self.condition1.kernel_ok,
            },
            "cond2": self.cond2.to_dict(),
            "cond3": self.cond3.to_dict(),
            "cond4": self.cond4.to_dict(),
            "cond5": self.cond5.to_dict(noise_norm),
            "violations": list(self.violations),
            "notes": list(self.notes),
        }


def _norm_tol(M: np.ndarray, tolerances: Tolerances) -> float:
    rtol = tolerances.rank_tol if tolerances.rank_tol is not None else default_rank_tol(M)
    return rtol * max(spectral_norm(M), np.finfo(float).tiny)


def eval_condition2(phi, psi, pattern: SupportPattern,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> Condition2Result:
    """Value of the least-squares certificate and the full-column-rank test on Psi_J^T Q"""
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    Q = nullspace_basis(phi, tolerances.rank_tol)
    if Q.shape[1] == 0:
        return Condition2Result(holds=True, value=0.0, rank_ok=True)

    I, J = list(pattern.I), list(pattern.J)
    rank_ok = check_kernel_condition(phi, psi, J, tolerances).ok
    A = Q.T @ psi[:, J]
    rhs = Q.T @ (psi[:, I] @ pattern.sign_I)
    u = pseudo_inverse(A, tolerances.rank_tol) @ rhs
    value = float(np.max(np.abs(u))) if u.size else 0.0
    holds = rank_ok and value < 1.0 - tolerances.strict_tol
    logger.debug(f"Condition 2: value {value:.15g}, rank_ok {rank_ok}")
    return Condition2Result(holds=holds, value=value, rank_ok=rank_ok)


def _omega(phi: np.ndarray, psi: np.ndarray, I: List[int], J: List[int],
           tolerances: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    """Omega = Psi_J^+ (Phi^T Phi A - Id) Psi_I and A = U (U^T Phi^T Phi U)^{-1} U^T"""
    n = phi.shape[1]
    psi_J = psi[:, J]
    U = nullspace_basis(psi_J.T, tolerances.rank_tol)
    if U.shape[1]:
        B = phi @ U
        if subspace_metrics(phi, U).sigma_min <= _norm_tol(phi, tolerances):
            raise KernelConditionError("U^T Phi^T Phi U is singular: Ker(Psi_J^T) meets Ker(Phi)")
        A = U @ sla.solve(B.T @ B, U.T, assume_a="pos")
    else:
        A = np.zeros((n, n))
    PtP = phi.T @ phi
    omega = pseudo_inverse(psi_J, tolerances.rank_tol) @ (PtP @ A - np.eye(n)) @ psi[:, I]
    return omega, A


def _kernel_distance_inf(C: np.ndarray, v: np.ndarray, tolerances: Tolerances) -> float:
    """min over u in Ker(Psi_J) of ||v - u||_inf, with the rows of C spanning Ker(Psi_J)^perp"""
    if v.size == 0:
        return 0.0
    return solve_inf_norm_eq(C, C @ v, tolerances).value


def _complement_rows(psi_J: np.ndarray, tolerances: Tolerances) -> np.ndarray:
    # Ker(Psi_J)^perp = Im(Psi_J^T)
    return range_basis(psi_J.T, tolerances.rank_tol).T


def eval_condition4_IC(phi, psi, pattern: SupportPattern,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> Condition4Result:
    """
    Identifiability criterion IC(s) = min over u in Ker(Psi_J) of ||Omega s - u||_inf.

    Raises:
        KernelConditionError: when Ker(Psi_J^T) meets Ker(Phi)
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    I, J = list(pattern.I), list(pattern.J)
    omega, _ = _omega(phi, psi, I, J, tolerances)
    if omega.shape != (len(J), len(I)):
        raise InvalidInputError(f"Omega has shape {omega.shape}, expected {(len(J), len(I))}")
    C = _complement_rows(psi[:, J], tolerances)
    ic = _kernel_distance_inf(C, omega @ pattern.sign_I, tolerances)
    logger.debug(f"Condition 4: IC {ic:.15g}")
    return Condition4Result(holds=ic < 1.0 - tolerances.strict_tol, ic=ic, omega=omega)


def eval_condition5_RC(phi, psi, I: Sequence[int], J: Sequence[int],
                       tolerances: Tolerances = DEFAULT_TOLERANCES,
                       max_support: int = RC_VERTEX_BUDGET, seed: int = DEFAULT_SEED,
                       max_workers: Optional[int] = None) -> Condition5Result:
    """
    Robustness criterion RC(I) = max over ||p||_inf <= 1 of min over u in Ker(Psi_J) of ||Omega p - u||_inf.

    The inner minimum is convex in p, so the maximum is attained at a sign vertex; vertices
    p and -p give the same value, so only half of them are evaluated.

    Raises:
        KernelConditionError: when Ker(Psi_J^T) meets Ker(Phi)
        UnsupportedError: when |I| exceeds max_support; carries a sampled lower bound
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    I = sorted(int(i) for i in I)
    J = sorted(int(j) for j in J)
    omega, A = _omega(phi, psi, I, J, tolerances)
    C = _complement_rows(psi[:, J], tolerances)

    m = phi.shape[0]
    mixed = pseudo_inverse(psi[:, J], tolerances.rank_tol) @ phi.T @ (phi @ A @ phi.T - np.eye(m))
    c_J = float(np.max(np.linalg.norm(mixed, axis=1))) if mixed.size else 0.0

    def value(p: np.ndarray) -> float:
        return _kernel_distance_inf(C, omega @ p, tolerances)

    k = len(I)
    if k > max_support:
        rng = np.random.default_rng(seed)
        samples = rng.choice([-1.0, 1.0], size=(RC_SAMPLES, k))
        lower = max(value(p) for p in samples)
        logger.warning(f"RC vertex enumeration needs 2^{k} LPs; sampled lower bound {lower:.6g}")
        raise UnsupportedError(
            f"|I| = {k} exceeds the vertex enumeration budget of {max_support}", lower_bound=lower
        )

    if k == 0:
        vertices = [np.zeros(0)]
    else:
        vertices = [np.array((1.0,) + rest) for rest in itertools.product((1.0, -1.0), repeat=k - 1)]

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            values = list(executor.map(value, vertices))
    else:
        values = [value(p) for p in vertices]

    rc = float(max(values))
    logger.debug(f"Condition 5: RC {rc:.15g} over {len(vertices)} vertices, c_J {c_J:.6g}")
    return Condition5Result(holds=rc < 1.0 - tolerances.strict_tol, rc=rc, c_J=c_J,
                            vertices_evaluated=len(vertices))


def eval_condition3(phi, psi, y, t: float,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> Condition3Result:
    """Injectivity of Phi on span{Psi_hat_i : |y_i| > t} with Psi_hat = (Psi Psi^T)^{-1} Psi"""
    if not 0.0 < t < 1.0:
        raise InvalidInputError(f"t must lie in (0, 1), got {t}")
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    y = as_vector(y, "y")
    if y.size != psi.shape[1]:
        raise InvalidInputError(f"y has {y.size} entries, expected {psi.shape[1]}")
    if numerical_rank(psi, tolerances.rank_tol) < psi.shape[0]:
        raise AssumptionViolationError("Condition 3 needs Psi Psi^T invertible")

    I_t = tuple(int(i) for i in np.flatnonzero(np.abs(y) > t))
    if not I_t:
        return Condition3Result(holds=True, I_t=(), t=t)

    psi_hat = sla.solve(psi @ psi.T, psi, assume_a="pos")
    B = range_basis(psi_hat[:, list(I_t)], tolerances.rank_tol)
    sigma_min = subspace_metrics(phi, B).sigma_min
    holds = sigma_min > _norm_tol(phi, tolerances)
    return Condition3Result(holds=holds, I_t=I_t, t=t)


def implication_tests(instance: ProblemInstance, x_bar,
                      t_grid: Sequence[float] = DEFAULT_T_GRID,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> ComparisonReport:
    """
    Evaluate Conditions 1 to 5 at x_bar and record every violated implication:
    cond2 => Unique, cond4 => Unique, cond5 => cond4, RC >= IC, and
    cond3 at (y, t) => the boxed condition with J = I(t)^c.
    """
    phi, psi = instance.phi, instance.psi
    report1 = verify_condition1(instance, x_bar, tolerances)
    pattern = report1.pattern
    violations: List[str] = []
    notes: List[str] = []

    cond2 = eval_condition2(phi, psi, pattern, tolerances)

    try:
        cond4 = eval_condition4_IC(phi, psi, pattern, tolerances)
    except KernelConditionError:
        cond4 = Condition4Result(holds=False, ic=float("inf"))
        notes.append("Condition 4 fails its kernel requirement")

    try:
        cond5 = eval_condition5_RC(phi, psi, pattern.I, pattern.J, tolerances)
    except KernelConditionError:
        cond5 = Condition5Result(holds=False, rc=float("inf"), c_J=float("inf"))
    except UnsupportedError as e:
        cond5 = Condition5Result(holds=False, rc=float("nan"), c_J=float("nan"))
        notes.append(f"RC not evaluated: {e} (sampled lower bound {e.lower_bound})")

    cond3 = Condition3Result(holds=False, I_t=(), t=float("nan"))
    if report1.certificate is None:
        notes.append("Condition 3 not evaluated: no certificate")
    else:
        y = report1.certificate.y
        for t in t_grid:
            try:
                result = eval_condition3(phi, psi, y, t, tolerances)
            except AssumptionViolationError:
                notes.append("Condition 3 not evaluated: Psi lacks full row rank")
                break
            if not result.holds:
                continue
            if not cond3.holds:
                cond3 = result
            J_t = [j for j in range(instance.l) if j not in set(result.I_t)]
            if not J_t:
                continue
            prime = verify_condition1_prime(instance, x_bar, J_t, tolerances)
            if prime.verdict != UNIQUE:
                violations.append(
                    f"Condition 3 holds at t={t} but the boxed condition with J=I(t)^c gives {prime.verdict}"
                )

    if cond2.holds and report1.verdict != UNIQUE:
        violations.append(f"Condition 2 holds but Condition 1 verdict is {report1.verdict}")
    if cond4.holds and report1.verdict != UNIQUE:
        violations.append(f"Condition 4 holds but Condition 1 verdict is {report1.verdict}")
    if cond5.holds and not cond4.holds:
        violations.append("Condition 5 holds but Condition 4 does not")
    if np.isfinite(cond5.rc) and np.isfinite(cond4.ic) and cond5.rc < cond4.ic - 1e-10:
        violations.append(f"RC {cond5.rc:.15g} is below IC {cond4.ic:.15g}")

    for v in violations:
        logger.error(f"Implication violated: {v}")
    return ComparisonReport(cond2, cond3, cond4, cond5, report1, violations, notes)
