"""
Robustness constants and error bounds.

All constants refer to an analysis operator normalized so that lambda_max(Psi Psi^T) = 1.
When the supplied Psi is not normalized it is rescaled by 1 / sigma_max(Psi) first; the
certificate y stays valid under that scaling while beta shrinks by the same factor.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from .certify import DualCertificate, SupportPattern, compute_beta
from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    AssumptionViolationError,
    InvalidCertificateError,
    InvalidInputError,
    KernelConditionError,
    UnboundedRatioError,
)
from .linalg import (
    as_matrix,
    as_vector,
    default_rank_tol,
    matrix_metrics,
    nullspace_basis,
    range_basis,
    spectral_norm,
    subspace_metrics,
)
from .lp import solve_linear_program

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class RobustnessConstants:
    rJ: float
    C3: float
    C4: float
    C0: float
    C1: float
    C2: float
    beta_norm: float
    rho: float
    tau: float
    psi_rescaled: bool
    psi_cond: float
    phi_norm: float
    yJ_inf: float
    C0_optimal: bool
    psi_scale: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rJ": self.rJ,
            "C0": self.C0,
            "C0_optimal": self.C0_optimal,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "C4": self.C4,
            "beta_norm": self.beta_norm,
            "rho": self.rho,
            "tau": self.tau,
            "psi_rescaled": self.psi_rescaled,
            "psi_scale": self.psi_scale,
            "psi_cond": self.psi_cond,
            "phi_norm": self.phi_norm,
            "yJ_inf": self.yJ_inf,
        }


def normalize_psi(psi) -> Tuple[np.ndarray, float, bool]:
    """Return (Psi / sigma_max, 1 / sigma_max, rescaled flag)"""
    psi = as_matrix(psi, "psi")
    sigma_max = spectral_norm(psi)
    if sigma_max == 0.0:
        raise AssumptionViolationError("Psi is the zero matrix")
    if abs(sigma_max ** 2 - 1.0) <= NORMALIZATION_TOL:
        return psi, 1.0, False
    scale = 1.0 / sigma_max
    return psi * scale, scale, True


def _norm_tol(M: np.ndarray, tolerances: Tolerances) -> float:
    rtol = tolerances.rank_tol if tolerances.rank_tol is not None else default_rank_tol(M)
    return rtol * max(spectral_norm(M), np.finfo(float).tiny)


def r_of_J(phi, psi, J: Iterable[int], tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """
    r(J) = sup ||u||_2 / ||Phi u||_2 over nonzero u in Ker(Psi_J^T).

    Returns 0 when Ker(Psi_J^T) = {0}.

    Raises:
        UnboundedRatioError: when Phi vanishes on part of Ker(Psi_J^T)
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    J = sorted(int(j) for j in J)
    U = nullspace_basis(psi[:, J].T, tolerances.rank_tol)
    if U.shape[1] == 0:
        return 0.0
    sigma_min = subspace_metrics(phi, U).sigma_min
    if sigma_min <= _norm_tol(phi, tolerances):
        raise UnboundedRatioError(
            f"r(J) is infinite: Ker(Psi_J^T) meets Ker(Phi) (sigma_min {sigma_min:.3e})"
        )
    return 1.0 / sigma_min


def rho_tau(phi, psi, I: Iterable[int], J: Iterable[int],
            tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[float, float]:
    """
    Constants with ||Psi_I^T x||_2 <= rho ||Psi_J^T x||_1 + tau ||Phi x||_2 for all x.

    Built from x = U a + V g with U spanning Ker(Psi_J^T) and V its orthogonal complement.
    """
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    I = sorted(int(i) for i in I)
    J = sorted(int(j) for j in J)
    psi_I, psi_J = psi[:, I], psi[:, J]

    U = nullspace_basis(psi_J.T, tolerances.rank_tol)
    V = range_basis(psi_J, tolerances.rank_tol)

    if U.shape[1]:
        sigma_U = subspace_metrics(phi, U).sigma_min
        if sigma_U <= _norm_tol(phi, tolerances):
            raise KernelConditionError("No finite (rho, tau): Ker(Psi_J^T) meets Ker(Phi)")
        psiI_U = spectral_norm(psi_I.T @ U)
        tau = psiI_U / sigma_U
    else:
        sigma_U, psiI_U, tau = 1.0, 0.0, 0.0

    if V.shape[1] == 0:
        return 0.0, tau

    sigma_V = subspace_metrics(psi_J.T, V).sigma_min
    rho = (psiI_U * spectral_norm(phi @ V) / sigma_U + spectral_norm(psi_I.T @ V)) / sigma_V
    return rho, tau


def psi_condition_number(psi) -> float:
    """Cond(Psi) = sqrt(lambda_max / lambda_min) of Psi Psi^T; needs full row rank"""
    psi = as_matrix(psi, "psi")
    metrics = matrix_metrics(psi)
    if metrics.rank < psi.shape[0] or metrics.lambda_min_MMt == 0.0:
        raise AssumptionViolationError("Psi does not have full row rank; Cond(Psi) is undefined")
    return math.sqrt(metrics.lambda_max_MMt / metrics.lambda_min_MMt)


def optimal_C0(C4: float, beta_norm: float) -> float:
    return math.sqrt(4.0 * C4 / (4.0 * beta_norm + C4 * beta_norm ** 2))


def robustness_constants(phi, psi, cert: DualCertificate, pattern: SupportPattern,
                         C0: Optional[float] = None,
                         tolerances: Tolerances = DEFAULT_TOLERANCES) -> RobustnessConstants:
    """
    Evaluate r(J), C0..C4, ||beta||_2 and (rho, tau) for a certificate with J = I^c.

    Args:
        phi, psi: Sensing and analysis operators (psi is rescaled when not normalized)
        cert: A certificate with a positive gap
        pattern: Support pattern the certificate was found for (K must be empty)
        C0: Penalty scale lambda = C0 * delta; None selects the minimizer of C1

    Returns:
        RobustnessConstants
    """
    phi = as_matrix(phi, "phi")
    if cert.gap <= tolerances.strict_tol:
        raise InvalidCertificateError(f"Certificate gap {cert.gap:.3e} is not positive")
    if pattern.K:
        raise InvalidInputError("Robustness constants need J = I^c (empty K)")
    if C0 is not None and not (np.isfinite(C0) and C0 > 0):
        raise InvalidInputError(f"C0 must be positive, got {C0}")

    psi_n, scale, rescaled = normalize_psi(psi)
    if rescaled:
        logger.warning(f"Psi rescaled by {scale:.6g} so that lambda_max(Psi Psi^T) = 1; "
                       f"constants refer to the rescaled operator")

    I, J = list(pattern.I), list(pattern.J)
    y = cert.y
    yJ_inf = float(np.max(np.abs(y[J]))) if J else 0.0
    if yJ_inf >= 1.0:
        raise InvalidCertificateError(f"||y_J||_inf = {yJ_inf} is not below 1")

    beta = compute_beta(phi, psi_n, y) if rescaled else cert.beta
    beta_norm = float(np.linalg.norm(beta))

    rJ = r_of_J(phi, psi_n, J, tolerances)
    C3 = rJ * math.sqrt(len(I))
    psi_cond = psi_condition_number(psi_n)
    phi_norm = spectral_norm(phi)
    C4 = (1.0 + psi_cond * phi_norm * C3) / (1.0 - yJ_inf)

    C0_is_optimal = C0 is None
    if C0 is None:
        if beta_norm > 0.0:
            C0 = optimal_C0(C4, beta_norm)
        else:
            logger.warning("beta = 0: the optimal C0 is unbounded, using C0 = 1")
            C0 = 1.0
            C0_is_optimal = False

    C1 = 2.0 * C3 + C0 * beta_norm + (1.0 + C0 * beta_norm / 2.0) ** 2 * C4 / C0
    C2 = 2.0 * C3 + 2.0 * C4 * beta_norm
    rho, tau = rho_tau(phi, psi_n, I, J, tolerances)

    logger.debug(f"Constants: rJ={rJ:.6g} C3={C3:.6g} C4={C4:.6g} C0={C0:.6g} "
                 f"C1={C1:.6g} C2={C2:.6g} |beta|={beta_norm:.6g}")
    return RobustnessConstants(
        rJ=rJ, C3=C3, C4=C4, C0=float(C0), C1=C1, C2=C2,
        beta_norm=beta_norm, rho=rho, tau=tau,
        psi_rescaled=rescaled, psi_cond=psi_cond, phi_norm=phi_norm,
        yJ_inf=yJ_inf, C0_optimal=C0_is_optimal, psi_scale=scale,
    )


def bregman_distance(psi, y, x, x_bar) -> float:
    """d_y(x, x_bar) = ||Psi^T x||_1 - ||Psi^T x_bar||_1 - <Psi y, x - x_bar>"""
    psi = as_matrix(psi, "psi")
    y = as_vector(y, "y")
    x = as_vector(x, "x")
    x_bar = as_vector(x_bar, "x_bar")
    return float(np.sum(np.abs(psi.T @ x)) - np.sum(np.abs(psi.T @ x_bar))
                 - (psi @ y) @ (x - x_bar))


def kernel_distance(psi, J: Iterable[int], x,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """min ||Psi^T (x - u)||_1 over u in Ker(Psi_J^T)"""
    psi = as_matrix(psi, "psi")
    x = as_vector(x, "x")
    J = sorted(int(j) for j in J)
    U = nullspace_basis(psi[:, J].T, tolerances.rank_tol)
    z = psi.T @ x
    d = U.shape[1]
    if d == 0:
        return float(np.sum(np.abs(z)))

    # variables (a, s): -s <= z - Psi^T U a <= s
    l = psi.shape[1]
    W = psi.T @ U
    c = np.concatenate([np.zeros(d), np.ones(l)])
    A_ub = np.vstack([
        np.hstack([-W, -np.eye(l)]),
        np.hstack([W, -np.eye(l)]),
    ])
    b_ub = np.concatenate([-z, z])
    bounds = [(None, None)] * d + [(0.0, None)] * l
    res = solve_linear_program(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, tolerances=tolerances)
    return float(res.value)


def bregman_error_bound(constants: RobustnessConstants, phi, psi, y, x, x_bar) -> float:
    """Right-hand side C3 ||Phi (x - x_bar)||_2 + C4 d_y(x, x_bar) bounding ||Psi^T (x - x_bar)||_1"""
    phi = as_matrix(phi, "phi")
    x = as_vector(x, "x")
    x_bar = as_vector(x_bar, "x_bar")
    residual = float(np.linalg.norm(phi @ (x - x_bar)))
    return constants.C3 * residual + constants.C4 * bregman_distance(psi, y, x, x_bar)


def thm2_bounds(constants: RobustnessConstants, delta: float) -> Dict[str, float]:
    """l1 error bounds C1 delta (lasso) and C2 delta (noise-constrained)"""
    if delta < 0:
        raise InvalidInputError(f"delta must be non-negative, got {delta}")
    return {"bound_1b": constants.C1 * delta, "bound_1c": constants.C2 * delta}


def l2_error_bounds(constants: RobustnessConstants, delta: float) -> Dict[str, float]:
    """l2 bounds on x - x* implied by the l1 bounds: ||x||_2 <= Cond(Psi) ||Psi^T x||_1"""
    bounds = thm2_bounds(constants, delta)
    return {
        "l2_1b": constants.psi_cond * bounds["bound_1b"],
        "l2_1c": constants.psi_cond * bounds["bound_1c"],
    }


def tail_l1(psi, x_star, I: Iterable[int]) -> float:
    """||Psi_J^T x*||_1 over the complement J of I"""
    psi = as_matrix(psi, "psi")
    z = psi.T @ as_vector(x_star, "x_star")
    mask = np.ones(z.size, dtype=bool)
    mask[list(I)] = False
    return float(np.sum(np.abs(z[mask])))


def thm3_bound(psi, x_star, I: Iterable[int], cert: DualCertificate,
               rho: float, tau: float, delta: float) -> float:
    """
    l2 error bound for approximately sparse signals:
    2(1+rho)/(1-||y_J||) * ||Psi_J^T x*||_1 + (2(1+rho)||beta||/(1-||y_J||) + 2 tau) * delta
    """
    psi = as_matrix(psi, "psi")
    x_star = as_vector(x_star, "x_star")
    I = sorted(int(i) for i in I)
    if cert.gap <= 0:
        raise InvalidCertificateError(f"Certificate gap {cert.gap:.3e} is not positive")
    if delta < 0:
        raise InvalidInputError(f"delta must be non-negative, got {delta}")

    z = np.abs(psi.T @ x_star)
    rest = np.setdiff1d(np.arange(z.size), I)
    if I and rest.size and z[I].min() < z[rest].max() - 1e-12 * max(z.max(), 1.0):
        raise InvalidInputError("I must index the largest entries of |Psi^T x*|")

    gap = cert.gap
    tail = float(np.sum(z[rest])) if rest.size else 0.0
    beta_norm = float(np.linalg.norm(cert.beta))
    return 2.0 * (1.0 + rho) / gap * tail + (2.0 * (1.0 + rho) * beta_norm / gap + 2.0 * tau) * delta


def relaxed_thm3_bound(theta1: float, rho: float, tau: float, yJ_inf: float,
                       beta_norm: float, tail: float, delta: float) -> Optional[float]:
    """
    The approximately-sparse bound with the certificate allowed to leave the range of Phi^T
    by theta1. Returns None (inapplicable) when mu1 = rho theta1 + ||y_J|| >= 1.
    """
    if theta1 < 0:
        raise InvalidInputError(f"theta1 must be non-negative, got {theta1}")
    mu1 = rho * theta1 + yJ_inf
    mu2 = tau * theta1 + beta_norm
    if mu1 >= 1.0:
        return None
    return 2.0 * (1.0 + rho) / (1.0 - mu1) * tail + (2.0 * (1.0 + rho) * mu2 / (1.0 - mu1) + 2.0 * tau) * delta
