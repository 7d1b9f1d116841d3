"""
Uniqueness verification for l1-analysis minimization.

A feasible x_bar is the unique minimizer of min ||Psi^T x||_1 s.t. Phi x = b exactly when
  1. Ker(Psi_J^T) and Ker(Phi) intersect only at 0 (J = cosupport of Psi^T x_bar), and
  2. some y with y_I = sign(Psi_I^T x_bar), ||y_J||_inf < 1 has Psi y in Im(Phi^T).
The certificate is found by projecting onto Ker(Phi) and solving an infinity-norm LP.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import AssumptionViolationError, InvalidInputError
from .linalg import (
    as_matrix,
    as_vector,
    default_rank_tol,
    nullspace_basis,
    numerical_rank,
    spectral_norm,
)
from .lp import INFEASIBLE, solve_inf_norm_box, solve_inf_norm_eq

logger = logging.getLogger(__name__)

UNIQUE = "Unique"
NOT_UNIQUE = "NotUnique"
MARGINAL = "Marginal"


def _index_tuple(idx: Iterable[int]) -> Tuple[int, ...]:
    return tuple(sorted(int(i) for i in idx))


def _json_float(value: float) -> Optional[float]:
    value = float(value)
    return value if np.isfinite(value) else None


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Phi (m x n), Psi (n x l), data b and the optional experiment parameters"""
    phi: np.ndarray
    psi: np.ndarray
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    delta: Optional[float] = None
    lam: Optional[float] = None
    seed: Optional[int] = None
    name: Optional[str] = None
    x_bar: Optional[np.ndarray] = None
    support_size: Optional[int] = None

    def __post_init__(self):
        phi = as_matrix(self.phi, "phi")
        psi = as_matrix(self.psi, "psi")
        b = as_vector(self.b, "b")
        if psi.shape[0] != phi.shape[1]:
            raise InvalidInputError(
                f"psi has {psi.shape[0]} rows but phi has {phi.shape[1]} columns"
            )
        if b.size != phi.shape[0]:
            raise InvalidInputError(f"b has {b.size} entries but phi has {phi.shape[0]} rows")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "b", b)

        for key in ("x_star", "x_bar"):
            value = getattr(self, key)
            if value is None:
                continue
            value = as_vector(value, key)
            if value.size != phi.shape[1]:
                raise InvalidInputError(f"{key} has {value.size} entries, expected {phi.shape[1]}")
            object.__setattr__(self, key, value)
        if self.support_size is not None and not 0 <= self.support_size <= psi.shape[1]:
            raise InvalidInputError(f"support_size must lie in [0, {psi.shape[1]}], got {self.support_size}")
        if self.delta is not None and not (np.isfinite(self.delta) and self.delta >= 0):
            raise InvalidInputError(f"delta must be finite and non-negative, got {self.delta}")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError(f"lambda must be finite and positive, got {self.lam}")

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def l(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True, eq=False)
class SupportPattern:
    """Partition of the analysis coefficients into support I, cosupport J and boxed set K"""
    I: Tuple[int, ...]
    J: Tuple[int, ...]
    K: Tuple[int, ...]
    sign_I: np.ndarray
    l: int

    def __post_init__(self):
        I, J, K = _index_tuple(self.I), _index_tuple(self.J), _index_tuple(self.K)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "K", K)
        sign = as_vector(self.sign_I, "sign_I")
        object.__setattr__(self, "sign_I", sign)

        combined = I + J + K
        if len(set(combined)) != len(combined):
            raise InvalidInputError("I, J and K must be pairwise disjoint")
        if sorted(combined) != list(range(self.l)):
            raise InvalidInputError(f"I, J and K must cover 0..{self.l - 1}")
        if sign.size != len(I) or not np.all(np.abs(sign) == 1.0):
            raise InvalidInputError("sign_I must be a +/-1 vector with one entry per index in I")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "I": list(self.I),
            "J": list(self.J),
            "K": list(self.K),
            "sign_I": [int(s) for s in self.sign_I],
        }


@dataclass(frozen=True, eq=False)
class KernelCheck:
    ok: bool
    sigma_min: float
    witness: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """y with y_I = sign_I, Psi y in Im(Phi^T), and beta = (Phi Phi^T)^{-1} Phi Psi y"""
    y: np.ndarray
    beta: np.ndarray
    gap: float
    range_residual: float
    sign_match: bool
    lp_value: float

    @property
    def yJ_inf(self) -> float:
        return 1.0 - self.gap

    def is_valid(self, tolerances: Tolerances = DEFAULT_TOLERANCES, psi_norm: float = 1.0) -> bool:
        return (self.sign_match
                and self.gap > tolerances.strict_tol
                and self.range_residual <= tolerances.feas_tol * (1.0 + psi_norm))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "y": self.y.tolist(),
            "beta": self.beta.tolist(),
            "gap": self.gap,
            "range_residual": self.range_residual,
            "sign_match": self.sign_match,
            "lp_value": self.lp_value,
        }


@dataclass(frozen=True, eq=False)
class NoCertificate:
    """The certificate LP has value >= 1 - strict_tol or is infeasible"""
    lp_value: float
    status: str


@dataclass(frozen=True, eq=False)
class ConditionReport:
    kernel_ok: bool
    certificate: Optional[DualCertificate]
    lp_value: float
    verdict: str
    tolerances: Tolerances
    pattern: SupportPattern
    kernel_sigma_min: float = 0.0
    kernel_witness: Optional[np.ndarray] = None
    lp_status: str = "Optimal"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "kernel_ok": self.kernel_ok,
            "kernel_sigma_min": self.kernel_sigma_min,
            "kernel_witness": None if self.kernel_witness is None else self.kernel_witness.tolist(),
            "lp_value": _json_float(self.lp_value),
            "lp_status": self.lp_status,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "support": self.pattern.to_dict(),
            "tolerances": self.tolerances.as_dict(),
        }


@dataclass(frozen=True, eq=False)
class AssumptionReport:
    a1: bool
    a2: bool
    a3: bool
    psi_scale: float
    lambda_max_psi: float = field(default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a1_phi_full_row_rank": self.a1,
            "a2_lambda_max_one": self.a2,
            "a3_psi_full_row_rank": self.a3,
            "psi_scale": _json_float(self.psi_scale),
            "lambda_max_psi": self.lambda_max_psi,
        }


def _signs(values: np.ndarray) -> np.ndarray:
    return np.where(values >= 0, 1.0, -1.0)


def extract_support(psi, x, supp_tol: float = DEFAULT_TOLERANCES.supp_tol) -> SupportPattern:
    """Support I = {i : |(Psi^T x)_i| > supp_tol * ||Psi^T x||_inf}, J = I^c, K empty"""
    psi = as_matrix(psi, "psi")
    x = as_vector(x, "x")
    if supp_tol < 0:
        raise InvalidInputError(f"supp_tol must be non-negative, got {supp_tol}")
    if x.size != psi.shape[0]:
        raise InvalidInputError(f"x has {x.size} entries but psi has {psi.shape[0]} rows")

    z = psi.T @ x
    l = psi.shape[1]
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    if zmax == 0.0:
        return SupportPattern((), tuple(range(l)), (), np.zeros(0), l)

    I = np.flatnonzero(np.abs(z) > supp_tol * zmax)
    J = np.setdiff1d(np.arange(l), I)
    return SupportPattern(tuple(I), tuple(J), (), _signs(z[I]), l)


def dominant_support(psi, x, k: int) -> SupportPattern:
    """Support of the k largest |(Psi^T x)_i|, ties broken by lower index"""
    psi = as_matrix(psi, "psi")
    x = as_vector(x, "x")
    z = psi.T @ x
    l = psi.shape[1]
    if not 0 <= k <= l:
        raise InvalidInputError(f"support size must lie in [0, {l}], got {k}")
    order = np.argsort(-np.abs(z), kind="stable")
    I = np.sort(order[:k])
    J = np.setdiff1d(np.arange(l), I)
    return SupportPattern(tuple(I), tuple(J), (), _signs(z[I]), l)


def _kernel_tol(psi: np.ndarray, tolerances: Tolerances) -> float:
    rtol = tolerances.rank_tol if tolerances.rank_tol is not None else default_rank_tol(psi)
    return rtol * max(spectral_norm(psi), np.finfo(float).tiny)


def check_kernel_condition(phi, psi, J: Iterable[int],
                           tolerances: Tolerances = DEFAULT_TOLERANCES) -> KernelCheck:
    """
    Test Ker(Psi_J^T) and Ker(Phi) intersect only at 0, i.e. Psi_J^T Q has full column rank.

    The rank decision compares sigma_min(Psi_J^T Q) with rank_tol * ||Psi||, which keeps the
    test invariant under rescaling Psi. A failing test returns a unit witness in the intersection.
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    J = list(_index_tuple(J))
    Q = nullspace_basis(phi, tolerances.rank_tol)
    d = Q.shape[1]
    if d == 0:
        return KernelCheck(ok=True, sigma_min=float("inf"))

    M = psi[:, J].T @ Q
    if M.shape[0] == 0:
        sigma_min, v = 0.0, np.eye(d)[:, 0]
    else:
        _, s, Vt = sla.svd(M, full_matrices=True)
        sigma_min = float(s[-1]) if s.size == d else 0.0
        v = Vt[-1]

    if sigma_min > _kernel_tol(psi, tolerances):
        return KernelCheck(ok=True, sigma_min=sigma_min)

    witness = Q @ v
    witness = witness / np.linalg.norm(witness)
    nz = np.flatnonzero(np.abs(witness) > 1e-14)
    if nz.size and witness[nz[0]] < 0:
        witness = -witness
    logger.debug(f"Kernel condition fails for |J|={len(J)}: sigma_min {sigma_min:.3e}")
    return KernelCheck(ok=False, sigma_min=sigma_min, witness=witness)


def compute_beta(phi, psi, y) -> np.ndarray:
    """beta = (Phi Phi^T)^{-1} Phi Psi y; needs Phi to have full row rank"""
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    m = phi.shape[0]
    if m == 0:
        return np.zeros(0)
    if numerical_rank(phi) < m:
        raise AssumptionViolationError("Phi does not have full row rank; beta is not unique")
    return sla.solve(phi @ phi.T, phi @ (psi @ np.asarray(y, dtype=float)), assume_a="pos")


def find_certificate(phi, psi, pattern: SupportPattern,
                     tolerances: Tolerances = DEFAULT_TOLERANCES):
    """
    Search for a dual certificate by solving min ||u||_inf s.t. Q^T Psi_J u = -Q^T Psi_I sign_I.

    With K nonempty the K coordinates are boxed in [-1, 1] and only the J block is minimized.

    Returns:
        DualCertificate when the LP value is below 1 - strict_tol, NoCertificate otherwise
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    if pattern.l != psi.shape[1]:
        raise InvalidInputError(f"pattern covers {pattern.l} coefficients, psi has {psi.shape[1]}")

    Q = nullspace_basis(phi, tolerances.rank_tol)
    I, J, K = list(pattern.I), list(pattern.J), list(pattern.K)
    u1 = -(Q.T @ (psi[:, I] @ pattern.sign_I))

    if K:
        cols = J + K
        A = Q.T @ psi[:, cols]
        sol = solve_inf_norm_box(A, u1, range(len(J)), range(len(J), len(cols)), tolerances)
    else:
        cols = J
        A = Q.T @ psi[:, J]
        sol = solve_inf_norm_eq(A, u1, tolerances)

    if sol.status == INFEASIBLE:
        logger.debug("Certificate LP infeasible")
        return NoCertificate(lp_value=float("inf"), status=INFEASIBLE)

    lp_value = sol.value
    if lp_value >= 1.0 - tolerances.strict_tol:
        logger.debug(f"No certificate: lp_value {lp_value:.15g}")
        return NoCertificate(lp_value=lp_value, status=sol.status)

    y = np.zeros(pattern.l)
    y[I] = pattern.sign_I
    y[cols] = sol.u

    range_residual = float(np.max(np.abs(Q.T @ (psi @ y)))) if Q.shape[1] else 0.0
    beta = compute_beta(phi, psi, y)
    return DualCertificate(
        y=y,
        beta=beta,
        gap=1.0 - lp_value,
        range_residual=range_residual,
        sign_match=bool(np.array_equal(y[I], pattern.sign_I)),
        lp_value=lp_value,
    )


def decide_verdict(kernel_ok: bool, lp_value: float, tolerances: Tolerances) -> str:
    if abs(lp_value - 1.0) <= tolerances.strict_tol:
        return MARGINAL
    if kernel_ok and lp_value < 1.0 - tolerances.strict_tol:
        return UNIQUE
    return NOT_UNIQUE


def _report(instance: ProblemInstance, pattern: SupportPattern, tolerances: Tolerances) -> ConditionReport:
    kernel = check_kernel_condition(instance.phi, instance.psi, pattern.J, tolerances)
    result = find_certificate(instance.phi, instance.psi, pattern, tolerances)
    cert = result if isinstance(result, DualCertificate) else None
    lp_status = "Optimal" if cert is not None else result.status
    verdict = decide_verdict(kernel.ok, result.lp_value, tolerances)
    return ConditionReport(
        kernel_ok=kernel.ok,
        certificate=cert,
        lp_value=result.lp_value,
        verdict=verdict,
        tolerances=tolerances,
        pattern=pattern,
        kernel_sigma_min=kernel.sigma_min,
        kernel_witness=kernel.witness,
        lp_status=lp_status,
    )


def verify_condition1(instance: ProblemInstance, x_bar,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> ConditionReport:
    """Check the kernel condition and the dual certificate at x_bar with J = I^c"""
    x_bar = as_vector(x_bar, "x_bar")
    if x_bar.size != instance.n:
        raise InvalidInputError(f"x_bar has {x_bar.size} entries, expected {instance.n}")
    pattern = extract_support(instance.psi, x_bar, tolerances.supp_tol)
    report = _report(instance, pattern, tolerances)
    logger.debug(f"Condition 1: |I|={len(pattern.I)}, kernel_ok={report.kernel_ok}, "
                 f"lp_value={report.lp_value:.15g}, verdict={report.verdict}")
    return report


def verify_condition1_prime(instance: ProblemInstance, x_bar, J: Iterable[int],
                            tolerances: Tolerances = DEFAULT_TOLERANCES) -> ConditionReport:
    """Check the boxed variant with a caller-chosen nonempty J inside the cosupport"""
    x_bar = as_vector(x_bar, "x_bar")
    if x_bar.size != instance.n:
        raise InvalidInputError(f"x_bar has {x_bar.size} entries, expected {instance.n}")
    base = extract_support(instance.psi, x_bar, tolerances.supp_tol)
    J = _index_tuple(J)
    if not J:
        raise InvalidInputError("J must be nonempty")
    outside = set(J) - set(base.J)
    if outside:
        raise InvalidInputError(f"J must lie in the cosupport; offending indices {sorted(outside)}")
    K = tuple(i for i in base.J if i not in set(J))
    pattern = SupportPattern(base.I, J, K, base.sign_I, base.l)
    report = _report(instance, pattern, tolerances)
    logger.debug(f"Condition 1': |J|={len(J)}, |K|={len(K)}, verdict={report.verdict}")
    return report


def check_assumptions(phi, psi) -> AssumptionReport:
    """Full row rank of Phi, lambda_max(Psi Psi^T) = 1, full row rank of Psi"""
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    sigma_max = spectral_norm(psi)
    lam_max = sigma_max ** 2
    return AssumptionReport(
        a1=numerical_rank(phi) == phi.shape[0],
        a2=abs(lam_max - 1.0) <= 1e-10,
        a3=numerical_rank(psi) == psi.shape[0],
        psi_scale=1.0 / sigma_max if sigma_max > 0 else float("inf"),
        lambda_max_psi=lam_max,
    )
