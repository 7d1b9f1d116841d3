"""
Desk-scale solvers for the three recovery programs and a brute-force uniqueness oracle.

  bp:    min ||Psi^T x||_1                    s.t. Phi x = b        (exact LP)
  lasso: min ||Phi x - b||_2^2 + lam ||Psi^T x||_1                   (ADMM + polishing)
  bpdn:  min ||Psi^T x||_1                    s.t. ||Phi x - b||_2 <= delta  (ADMM + polishing)

The first-order iterations only have to identify the support of Psi^T x; the final
point comes from the support-restricted optimality system and is accepted once its
KKT residual, measured exactly by an LP over the subdifferential, is below solver_tol.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from .config import DEFAULT_SEED, DEFAULT_TOLERANCES, Tolerances
from .errors import InfeasibleError, InvalidInputError, NotConvergedError
from .linalg import as_matrix, as_vector, nullspace_basis, pseudo_inverse
from .lp import INFEASIBLE, OPTIMAL, solve_linear_program

logger = logging.getLogger(__name__)

MODELS = ("bp", "lasso", "bpdn")

POLISH_EVERY = 50
RETRY_EVERY = 1000
BALANCE_EVERY = 10
AMBIGUOUS_DIAMETER = 1e-6


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    model: str = "bp"
    polished: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            "x": self.x.tolist(),
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "polished": self.polished,
        }


@dataclass(frozen=True, eq=False)
class UniquenessVerdict:
    """witness_pair is set only when the face diameter exceeds 1e-6; ambiguous verdicts carry none"""
    unique: bool
    optimal_value: float
    face_diameter: float
    witness_pair: Optional[Tuple[np.ndarray, np.ndarray]] = None
    ambiguous: bool = False


@dataclass(frozen=True, eq=False)
class ProbeResult:
    max_residual_spread: float
    max_objective_spread: float
    results: List[SolveResult] = field(default_factory=list)


def _validate(phi, psi, b) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi = as_matrix(phi, "phi")
    psi = as_matrix(psi, "psi")
    b = as_vector(b, "b")
    if psi.shape[0] != phi.shape[1]:
        raise InvalidInputError(f"psi has {psi.shape[0]} rows but phi has {phi.shape[1]} columns")
    if b.size != phi.shape[0]:
        raise InvalidInputError(f"b has {b.size} entries but phi has {phi.shape[0]} rows")
    return phi, psi, b


def _soft(v: np.ndarray, k: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - k, 0.0)


def _support(z: np.ndarray, supp_tol: float) -> Tuple[np.ndarray, np.ndarray]:
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    if zmax == 0.0:
        return np.zeros(0, dtype=int), np.zeros(0)
    I = np.flatnonzero(np.abs(z) > supp_tol * zmax)
    return I, np.sign(z[I])


def _stationarity_residual(psi: np.ndarray, z: np.ndarray, g: np.ndarray,
                           mu_bounds: Tuple[Optional[float], Optional[float]],
                           tolerances: Tolerances) -> float:
    """min ||Psi y + mu g||_inf over y in the subdifferential of ||.||_1 at z and mu in mu_bounds"""
    n, l = psi.shape
    I, s = _support(z, tolerances.supp_tol)
    J = np.setdiff1d(np.arange(l), I)
    base = psi[:, I] @ s
    k = J.size

    # variables (y_J, mu, t)
    G = np.hstack([psi[:, J], g.reshape(-1, 1)])
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([G, -ones]), np.hstack([-G, -ones])])
    b_ub = np.concatenate([-base, base])
    c = np.zeros(k + 2)
    c[-1] = 1.0
    bounds = [(-1.0, 1.0)] * k + [mu_bounds, (0.0, None)]
    res = solve_linear_program(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, tolerances=tolerances)
    if res.status != OPTIMAL:
        return float("inf")
    return max(float(res.value), 0.0)


def lasso_objective(phi, psi, b, lam: float, x) -> float:
    r = phi @ x - b
    return float(r @ r + lam * np.sum(np.abs(psi.T @ x)))


def lasso_kkt_residual(phi, psi, b, lam: float, x,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Distance of 0 from the subdifferential of the lasso objective, scaled by 2 / lam"""
    phi, psi, b = _validate(phi, psi, b)
    x = as_vector(x, "x")
    g = (2.0 / lam) * (phi.T @ (phi @ x - b))
    return _stationarity_residual(psi, psi.T @ x, g, (1.0, 1.0), tolerances)


def bpdn_kkt_residual(phi, psi, b, delta: float, x,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """KKT residual of the noise-constrained program: stationarity plus ball infeasibility"""
    phi, psi, b = _validate(phi, psi, b)
    x = as_vector(x, "x")
    r = phi @ x - b
    r_norm = float(np.linalg.norm(r))
    infeasibility = max(0.0, r_norm - delta) / (1.0 + delta)
    active = r_norm >= delta * (1.0 - 1e-6)
    mu_bounds = (0.0, None) if active else (0.0, 0.0)
    stationarity = _stationarity_residual(psi, psi.T @ x, phi.T @ r, mu_bounds, tolerances)
    return max(stationarity, infeasibility)


def solve_bp(phi, psi, b, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SolveResult:
    """
    Basis pursuit as an LP with Psi^T x = z+ - z-.

    Raises:
        InfeasibleError: when b is outside the range of Phi
    """
    phi, psi, b = _validate(phi, psi, b)
    m, n = phi.shape
    l = psi.shape[1]

    c = np.concatenate([np.zeros(n), np.ones(2 * l)])
    A_eq = np.vstack([
        np.hstack([phi, np.zeros((m, 2 * l))]),
        np.hstack([psi.T, -np.eye(l), np.eye(l)]),
    ])
    b_eq = np.concatenate([b, np.zeros(l)])
    bounds = [(None, None)] * n + [(0.0, None)] * (2 * l)

    res = solve_linear_program(c, A_eq, b_eq, bounds=bounds, tolerances=tolerances)
    if res.status == INFEASIBLE:
        raise InfeasibleError("b is not in the range of Phi")
    if res.status != OPTIMAL:
        raise NotConvergedError(f"Basis pursuit LP ended with status {res.status}")

    x = res.x[:n]
    objective = float(np.sum(np.abs(psi.T @ x)))
    feas = float(np.max(np.abs(phi @ x - b))) / (1.0 + float(np.max(np.abs(b)))) if m else 0.0
    kkt = max(res.duality_gap / (1.0 + objective), feas)
    logger.debug(f"BP solved: objective {objective:.15g}, kkt {kkt:.3e}")
    return SolveResult(x, objective, kkt, res.iterations, kkt <= tolerances.solver_tol, "bp")


def _polish_lasso(phi, psi, b, lam, I, s, x_ref) -> Optional[np.ndarray]:
    """Stationary point of the lasso restricted to {Psi_J^T x = 0} with the signs s on I"""
    n, l = psi.shape
    J = np.setdiff1d(np.arange(l), I)
    U = nullspace_basis(psi[:, J].T)
    if U.shape[1] == 0:
        xp = np.zeros(n)
    else:
        B = phi @ U
        M = B.T @ B
        rhs = B.T @ b - 0.5 * lam * (U.T @ (psi[:, I] @ s))
        a0 = U.T @ x_ref
        a = a0 + sla.lstsq(M, rhs - M @ a0)[0]
        xp = U @ a
    if I.size and not np.array_equal(np.sign((psi.T @ xp)[I]), s):
        return None
    return xp


def _polish_bpdn(phi, psi, b, delta, I, s) -> Optional[np.ndarray]:
    """Minimizer of s^T Psi_I^T x over {Psi_J^T x = 0, ||Phi x - b|| <= delta}"""
    n, l = psi.shape
    J = np.setdiff1d(np.arange(l), I)
    U = nullspace_basis(psi[:, J].T)
    if U.shape[1] == 0:
        return np.zeros(n) if np.linalg.norm(b) <= delta else None

    B = phi @ U
    c = U.T @ (psi[:, I] @ s)
    a_ls = pseudo_inverse(B) @ b
    r0 = float(np.linalg.norm(B @ a_ls - b))
    slack = delta ** 2 - r0 ** 2
    if slack < 0:
        return None

    M = B.T @ B
    q = pseudo_inverse(M) @ c
    if np.linalg.norm(M @ q - c) > 1e-10 * (1.0 + np.linalg.norm(c)):
        # c has a component in Ker(B): the restricted program is unbounded below
        return None
    cq = float(c @ q)
    a = a_ls if cq <= 0.0 else a_ls - np.sqrt(slack / cq) * q
    xp = U @ a
    if I.size and not np.array_equal(np.sign((psi.T @ xp)[I]), s):
        return None
    return xp


def _balance(rho: float, r_norm: float, s_norm: float) -> float:
    if r_norm > 10.0 * s_norm:
        return rho * 2.0
    if s_norm > 10.0 * r_norm:
        return rho / 2.0
    return rho


def _not_converged(model: str, best: Optional[SolveResult], iterations: int) -> NotConvergedError:
    kkt = best.kkt_residual if best is not None else float("inf")
    logger.debug(f"{model} did not converge after {iterations} iterations (kkt {kkt:.3e})")
    return NotConvergedError(
        f"{model} did not reach the KKT tolerance after {iterations} iterations (kkt {kkt:.3e})",
        result=best,
        diagnostics={"kkt_residual": kkt, "iterations": iterations},
    )


def solve_lasso(phi, psi, b, lam: float, tolerances: Tolerances = DEFAULT_TOLERANCES,
                max_iter: int = 20000, rho: float = 1.0,
                x0: Optional[np.ndarray] = None) -> SolveResult:
    """
    Solve min ||Phi x - b||_2^2 + lam ||Psi^T x||_1.

    Args:
        phi, psi, b: Problem data
        lam: Penalty weight (> 0)
        tolerances: solver_tol is the KKT target, supp_tol the support threshold
        max_iter: ADMM iteration cap
        rho: Initial ADMM penalty (adapted by residual balancing)
        x0: Starting point (defaults to 0)

    Raises:
        NotConvergedError: carrying the best point found as .result
    """
    phi, psi, b = _validate(phi, psi, b)
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    n, l = psi.shape

    PtP = phi.T @ phi
    PsPs = psi @ psi.T
    Ptb = phi.T @ b
    z = psi.T @ as_vector(x0, "x0") if x0 is not None else np.zeros(l)
    u = np.zeros(l)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    system = pseudo_inverse(2.0 * PtP + rho * PsPs)

    def finish(point: np.ndarray, iterations: int, polished: bool) -> SolveResult:
        kkt = lasso_kkt_residual(phi, psi, b, lam, point, tolerances)
        return SolveResult(point, lasso_objective(phi, psi, b, lam, point), kkt,
                           iterations, kkt <= tolerances.solver_tol, "lasso", polished)

    best: Optional[SolveResult] = None
    tried = set()
    for k in range(1, max_iter + 1):
        x = system @ (2.0 * Ptb + rho * (psi @ (z - u)))
        Ptx = psi.T @ x
        z_old = z
        z = _soft(Ptx + u, lam / rho)
        u = u + Ptx - z

        r_norm = float(np.linalg.norm(Ptx - z))
        s_norm = float(rho * np.linalg.norm(psi @ (z - z_old)))

        if k % POLISH_EVERY == 0 or k == max_iter:
            I = np.flatnonzero(z)
            s = np.sign(z[I])
            key = (tuple(I), tuple(s))
            if key not in tried or k % RETRY_EVERY == 0:
                tried.add(key)
                xp = _polish_lasso(phi, psi, b, lam, I, s, x)
                if xp is not None:
                    candidate = finish(xp, k, True)
                    if best is None or candidate.kkt_residual < best.kkt_residual:
                        best = candidate
                    if candidate.converged:
                        logger.debug(f"lasso converged by polishing at iteration {k}")
                        return candidate

            scale = 1.0 + float(np.linalg.norm(z))
            if r_norm <= 1e-10 * scale and s_norm <= 1e-10 * scale:
                candidate = finish(x, k, False)
                if best is None or candidate.kkt_residual < best.kkt_residual:
                    best = candidate
                if candidate.converged:
                    return candidate

        if k % BALANCE_EVERY == 0:
            new_rho = _balance(rho, r_norm, s_norm)
            if new_rho != rho:
                u = u * (rho / new_rho)
                rho = new_rho
                system = pseudo_inverse(2.0 * PtP + rho * PsPs)

    if best is None:
        best = finish(x, max_iter, False)
    raise _not_converged("lasso", best, max_iter)


def solve_bpdn(phi, psi, b, delta: float, tolerances: Tolerances = DEFAULT_TOLERANCES,
               max_iter: int = 20000, rho: float = 1.0,
               x0: Optional[np.ndarray] = None) -> SolveResult:
    """
    Solve min ||Psi^T x||_1 subject to ||Phi x - b||_2 <= delta.

    Raises:
        InfeasibleError: when the least-squares residual already exceeds delta
        NotConvergedError: carrying the best point found as .result
    """
    phi, psi, b = _validate(phi, psi, b)
    if not (np.isfinite(delta) and delta >= 0):
        raise InvalidInputError(f"delta must be non-negative, got {delta}")
    n, l = psi.shape
    m = phi.shape[0]

    ls_residual = float(np.linalg.norm(b - phi @ (pseudo_inverse(phi) @ b))) if m else 0.0
    if ls_residual > delta + tolerances.feas_tol * (1.0 + float(np.linalg.norm(b))):
        raise InfeasibleError(
            f"No point satisfies ||Phi x - b|| <= {delta:g}: least-squares residual {ls_residual:.6g}"
        )
    if delta == 0.0:
        res = solve_bp(phi, psi, b, tolerances)
        return SolveResult(res.x, res.objective, res.kkt_residual, res.iterations,
                           res.converged, "bpdn")
    if float(np.linalg.norm(b)) <= delta:
        return SolveResult(np.zeros(n), 0.0, 0.0, 0, True, "bpdn")

    system = pseudo_inverse(psi @ psi.T + phi.T @ phi)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    z = psi.T @ x
    w = phi @ x - b
    w_norm = np.linalg.norm(w)
    if w_norm > delta:
        w = w * (delta / w_norm)
    u1 = np.zeros(l)
    u2 = np.zeros(m)

    def finish(point: np.ndarray, iterations: int, polished: bool) -> SolveResult:
        kkt = bpdn_kkt_residual(phi, psi, b, delta, point, tolerances)
        return SolveResult(point, float(np.sum(np.abs(psi.T @ point))), kkt,
                           iterations, kkt <= tolerances.solver_tol, "bpdn", polished)

    best: Optional[SolveResult] = None
    tried = set()
    for k in range(1, max_iter + 1):
        x = system @ (psi @ (z - u1) + phi.T @ (w + b - u2))
        Ptx = psi.T @ x
        Px = phi @ x - b
        z_old, w_old = z, w
        z = _soft(Ptx + u1, 1.0 / rho)
        v = Px + u2
        v_norm = np.linalg.norm(v)
        w = v if v_norm <= delta else v * (delta / v_norm)
        u1 = u1 + Ptx - z
        u2 = u2 + Px - w

        r_norm = float(np.sqrt(np.sum((Ptx - z) ** 2) + np.sum((Px - w) ** 2)))
        s_norm = float(rho * np.linalg.norm(psi @ (z - z_old) + phi.T @ (w - w_old)))

        if k % POLISH_EVERY == 0 or k == max_iter:
            I = np.flatnonzero(z)
            s = np.sign(z[I])
            key = (tuple(I), tuple(s))
            if key not in tried or k % RETRY_EVERY == 0:
                tried.add(key)
                xp = _polish_bpdn(phi, psi, b, delta, I, s)
                if xp is not None:
                    candidate = finish(xp, k, True)
                    if best is None or candidate.kkt_residual < best.kkt_residual:
                        best = candidate
                    if candidate.converged:
                        logger.debug(f"bpdn converged by polishing at iteration {k}")
                        return candidate

            scale = 1.0 + float(np.linalg.norm(z))
            if r_norm <= 1e-10 * scale and s_norm <= 1e-10 * scale:
                candidate = finish(x, k, False)
                if best is None or candidate.kkt_residual < best.kkt_residual:
                    best = candidate
                if candidate.converged:
                    return candidate

        if k % BALANCE_EVERY == 0:
            new_rho = _balance(rho, r_norm, s_norm)
            if new_rho != rho:
                u1 = u1 * (rho / new_rho)
                u2 = u2 * (rho / new_rho)
                rho = new_rho

    if best is None:
        best = finish(x, max_iter, False)
    raise _not_converged("bpdn", best, max_iter)


def solve(model: str, phi, psi, b, lambda_or_delta: Optional[float] = None,
          tolerances: Tolerances = DEFAULT_TOLERANCES, **kwargs) -> SolveResult:
    """Dispatch to one of the three programs by name"""
    if model == "bp":
        return solve_bp(phi, psi, b, tolerances)
    if lambda_or_delta is None:
        raise InvalidInputError(f"model {model} needs {'lambda' if model == 'lasso' else 'delta'}")
    if model == "lasso":
        return solve_lasso(phi, psi, b, lambda_or_delta, tolerances, **kwargs)
    if model == "bpdn":
        return solve_bpdn(phi, psi, b, lambda_or_delta, tolerances, **kwargs)
    raise InvalidInputError(f"Unknown model {model!r}; expected one of {', '.join(MODELS)}")


def uniqueness_oracle(phi, psi, b, optimal_value: float,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> UniquenessVerdict:
    """
    Decide whether {x : Phi x = b, ||Psi^T x||_1 <= v*} is a single point.

    Each coordinate is maximized and minimized over that set (2n LPs); the set is a
    point when no coordinate spreads by more than oracle_tol.
    """
    phi, psi, b = _validate(phi, psi, b)
    m, n = phi.shape
    l = psi.shape[1]
    budget = optimal_value + 1e-10 * (1.0 + abs(optimal_value))

    # variables (x, s): -s <= Psi^T x <= s, sum(s) <= budget, Phi x = b
    A_eq = np.hstack([phi, np.zeros((m, l))])
    A_ub = np.vstack([
        np.hstack([psi.T, -np.eye(l)]),
        np.hstack([-psi.T, -np.eye(l)]),
        np.concatenate([np.zeros(n), np.ones(l)]).reshape(1, -1),
    ])
    b_ub = np.concatenate([np.zeros(2 * l), [budget]])
    bounds = [(None, None)] * n + [(0.0, None)] * l

    lows, highs = [], []
    for i in range(n):
        points = []
        for direction in (1.0, -1.0):
            c = np.zeros(n + l)
            c[i] = direction
            res = solve_linear_program(c, A_eq, b, A_ub, b_ub, bounds, tolerances)
            if res.status == INFEASIBLE:
                raise InfeasibleError("Optimal set is empty: optimal_value is below the true optimum")
            if res.status != OPTIMAL:
                raise NotConvergedError(f"Face LP for coordinate {i} ended with status {res.status}")
            points.append(res.x[:n])
        lows.append(points[0])
        highs.append(points[1])

    spreads = np.array([highs[i][i] - lows[i][i] for i in range(n)]) if n else np.zeros(0)
    diameter = float(np.max(spreads)) if n else 0.0
    unique = diameter <= tolerances.oracle_tol
    ambiguous = tolerances.oracle_tol < diameter < AMBIGUOUS_DIAMETER

    witness = None
    if not unique and not ambiguous:
        i = int(np.argmax(spreads))
        witness = (highs[i], lows[i])
    logger.debug(f"Uniqueness oracle: face diameter {diameter:.3e}, unique={unique}")
    return UniquenessVerdict(unique, float(optimal_value), diameter, witness, ambiguous)


def solution_set_probe(phi, psi, b, lambda_or_delta: float, n_starts: int = 5,
                       model: str = "lasso", seed: int = DEFAULT_SEED,
                       seeds: Optional[Sequence[int]] = None,
                       max_workers: Optional[int] = None,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> ProbeResult:
    """
    Solve one program from several random starting points and measure how much
    Phi x - b and ||Psi^T x||_1 vary across the returned solutions.
    """
    phi, psi, b = _validate(phi, psi, b)
    if model not in ("lasso", "bpdn"):
        raise InvalidInputError(f"solution_set_probe supports lasso and bpdn, got {model!r}")
    if seeds is None:
        seeds = [seed + k for k in range(n_starts)]
    seeds = list(seeds)
    if len(seeds) < 2:
        raise InvalidInputError("solution_set_probe needs at least two starts")
    n = phi.shape[1]

    def run(start_seed: int) -> SolveResult:
        x0 = np.random.default_rng(start_seed).standard_normal(n)
        try:
            return solve(model, phi, psi, b, lambda_or_delta, tolerances, x0=x0)
        except NotConvergedError as e:
            logger.warning(f"Probe start {start_seed} did not converge: {e}")
            if e.result is None:
                raise
            return e.result

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run, seeds))
    else:
        results = [run(s) for s in seeds]

    residuals = np.array([phi @ r.x - b for r in results])
    objectives = np.array([np.sum(np.abs(psi.T @ r.x)) for r in results])
    residual_spread = float(np.max(residuals.max(axis=0) - residuals.min(axis=0))) if residuals.size else 0.0
    objective_spread = float(objectives.max() - objectives.min())
    return ProbeResult(residual_spread, objective_spread, results)
