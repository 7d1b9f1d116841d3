"""
Robustness sweep: noisy re-solves of an instance checked against the error bounds.

Each draw d uses seed base_seed + d to pick a noise direction; for every delta in the
grid the data become b = Phi x* + delta * direction and the recovery programs are
solved with lambda = C0 * delta. Rows compare an observed error with its bound.
"""
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .certify import (
    UNIQUE,
    DualCertificate,
    ProblemInstance,
    SupportPattern,
    check_kernel_condition,
    dominant_support,
    find_certificate,
    verify_condition1,
)
from .config import DEFAULT_SEED, DEFAULT_TOLERANCES, Tolerances
from .constants import (
    RobustnessConstants,
    bregman_distance,
    normalize_psi,
    rho_tau,
    robustness_constants,
    thm2_bounds,
    thm3_bound,
)
from .errors import InvalidCertificateError, InvalidInputError, KernelConditionError, L1CertError
from .logger import RunLogger
from .solvers import solve_bp, solve_bpdn, solve_lasso

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["seed", "model", "delta", "lambda", "lhs", "bound", "satisfied", "iters"]
ROW_MODELS = ("bp", "lasso", "lasso-bregman", "lasso-residual", "bpdn", "bpdn-bregman", "bpdn-l2")
BOUND_REL_SLACK = 1e-6
DEFAULT_DELTA_GRID = (0.0, 1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class SweepRecord:
    seed: int
    model: str
    delta: float
    lam: Optional[float]
    lhs: float
    bound: float
    satisfied: bool
    iters: int
    error: Optional[str] = None

    def as_row(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "model": self.model,
            "delta": self.delta,
            "lambda": self.lam,
            "lhs": self.lhs,
            "bound": self.bound,
            "satisfied": self.satisfied,
            "iters": self.iters,
        }


@dataclass
class SweepConfig:
    noise_draws: int = 10
    delta_grid: Sequence[float] = DEFAULT_DELTA_GRID
    seed: int = DEFAULT_SEED
    C0: Optional[float] = None
    support_size: Optional[int] = None
    max_workers: Optional[int] = None
    tolerances: Tolerances = field(default_factory=lambda: DEFAULT_TOLERANCES)

    def __post_init__(self):
        if self.noise_draws < 1:
            raise InvalidInputError(f"noise_draws must be positive, got {self.noise_draws}")
        if any(not (np.isfinite(d) and d >= 0) for d in self.delta_grid):
            raise InvalidInputError(f"delta grid must be finite and non-negative: {list(self.delta_grid)}")
        self.delta_grid = tuple(sorted(float(d) for d in self.delta_grid))


def bound_satisfied(lhs: float, bound: float, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """lhs <= bound (1 + 1e-6) + 10 solver_tol; NaN never passes"""
    if not np.isfinite(lhs):
        return False
    return lhs <= bound * (1.0 + BOUND_REL_SLACK) + 10.0 * tolerances.solver_tol


class SweepRunner:
    """Runs the noise sweep for one instance"""

    def __init__(self, instance: ProblemInstance, config: Optional[SweepConfig] = None,
                 run_logger: Optional[RunLogger] = None):
        if instance.x_star is None:
            raise InvalidInputError("The sweep needs x_star in the instance")
        self.config = config or SweepConfig()
        self.tolerances = self.config.tolerances
        self.run_logger = run_logger or RunLogger()

        psi, scale, rescaled = normalize_psi(instance.psi)
        if rescaled:
            logger.warning(f"Psi rescaled by {scale:.6g}; errors are measured with the rescaled operator")
        self.instance = instance
        self.phi = instance.phi
        self.psi = psi
        self.x_star = instance.x_star

        support_size = self.config.support_size
        if support_size is None:
            support_size = instance.support_size
        self.approx_mode = support_size is not None

        self.constants: Optional[RobustnessConstants] = None
        if self.approx_mode:
            self.pattern = dominant_support(self.psi, self.x_star, support_size)
            self.cert = self._certificate_for(self.pattern)
        else:
            normalized = ProblemInstance(self.phi, self.psi, self.phi @ self.x_star)
            report = verify_condition1(normalized, self.x_star, self.tolerances)
            if report.verdict != UNIQUE:
                raise InvalidCertificateError(
                    f"x* is not certified unique (verdict {report.verdict}); the robustness bounds do not apply"
                )
            self.pattern = report.pattern
            self.cert = report.certificate
            self.constants = robustness_constants(self.phi, self.psi, self.cert, self.pattern,
                                                  self.config.C0, self.tolerances)
        self.rho, self.tau = rho_tau(self.phi, self.psi, self.pattern.I, self.pattern.J, self.tolerances)

    def _certificate_for(self, pattern: SupportPattern) -> DualCertificate:
        kernel = check_kernel_condition(self.phi, self.psi, pattern.J, self.tolerances)
        if not kernel.ok:
            raise KernelConditionError("The dominant support fails the kernel condition")
        result = find_certificate(self.phi, self.psi, pattern, self.tolerances)
        if not isinstance(result, DualCertificate):
            raise InvalidCertificateError(
                f"No certificate for the dominant support (lp_value {result.lp_value:.6g})"
            )
        return result

    def _l1_error(self, x: np.ndarray) -> float:
        return float(np.sum(np.abs(self.psi.T @ (x - self.x_star))))

    def _l2_error(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.psi.T @ (x - self.x_star)))

    def _record(self, seed: int, model: str, delta: float, lam: Optional[float],
                lhs: float, bound: float, iters: int) -> SweepRecord:
        return SweepRecord(seed, model, delta, lam, lhs, bound,
                           bound_satisfied(lhs, bound, self.tolerances), iters)

    def _failed(self, seed: int, models: Sequence[str], delta: float, lam: Optional[float],
                error: Exception) -> List[SweepRecord]:
        return [SweepRecord(seed, model, delta, lam, float("nan"), float("nan"), False, 0, str(error))
                for model in models]

    def _approx_rows(self, seed: int, delta: float, b: np.ndarray) -> List[SweepRecord]:
        bound = thm3_bound(self.psi, self.x_star, self.pattern.I, self.cert, self.rho, self.tau, delta)
        try:
            res = solve_bpdn(self.phi, self.psi, b, delta, self.tolerances)
        except L1CertError as e:
            return self._failed(seed, ["bpdn-l2"], delta, None, e)
        return [self._record(seed, "bpdn-l2", delta, None, self._l2_error(res.x), bound, res.iterations)]

    def _exact_rows(self, seed: int, delta: float, b: np.ndarray) -> List[SweepRecord]:
        c = self.constants
        if delta == 0.0:
            try:
                res = solve_bp(self.phi, self.psi, b, self.tolerances)
            except L1CertError as e:
                return self._failed(seed, ["bp"], delta, None, e)
            return [self._record(seed, "bp", delta, None, self._l1_error(res.x), 0.0, res.iterations)]

        rows: List[SweepRecord] = []
        bounds = thm2_bounds(c, delta)
        beta_norm = c.beta_norm
        y = self.cert.y

        lam = c.C0 * delta
        try:
            res = solve_lasso(self.phi, self.psi, b, lam, self.tolerances)
            x = res.x
            residual = float(np.linalg.norm(self.phi @ x - b))
            rows.append(self._record(seed, "lasso", delta, lam, self._l1_error(x),
                                     bounds["bound_1b"], res.iterations))
            rows.append(self._record(seed, "lasso-bregman", delta, lam,
                                     bregman_distance(self.psi, y, x, self.x_star),
                                     (delta + lam * beta_norm / 2.0) ** 2 / lam, res.iterations))
            rows.append(self._record(seed, "lasso-residual", delta, lam, residual,
                                     delta + lam * beta_norm, res.iterations))
        except L1CertError as e:
            rows.extend(self._failed(seed, ["lasso", "lasso-bregman", "lasso-residual"], delta, lam, e))

        try:
            res = solve_bpdn(self.phi, self.psi, b, delta, self.tolerances)
            x = res.x
            rows.append(self._record(seed, "bpdn", delta, None, self._l1_error(x),
                                     bounds["bound_1c"], res.iterations))
            rows.append(self._record(seed, "bpdn-bregman", delta, None,
                                     bregman_distance(self.psi, y, x, self.x_star),
                                     2.0 * delta * beta_norm, res.iterations))
            l2_bound = thm3_bound(self.psi, self.x_star, self.pattern.I, self.cert,
                                  self.rho, self.tau, delta)
            rows.append(self._record(seed, "bpdn-l2", delta, None, self._l2_error(x),
                                     l2_bound, res.iterations))
        except L1CertError as e:
            rows.extend(self._failed(seed, ["bpdn", "bpdn-bregman", "bpdn-l2"], delta, None, e))
        return rows

    def run_draw(self, draw: int) -> List[SweepRecord]:
        """All rows of one noise draw, over the whole delta grid"""
        seed = self.config.seed + draw
        rng = np.random.default_rng(seed)
        m = self.phi.shape[0]
        direction = rng.standard_normal(m)
        direction /= np.linalg.norm(direction)

        rows: List[SweepRecord] = []
        for delta in self.config.delta_grid:
            b = self.phi @ self.x_star + delta * direction
            if self.approx_mode:
                rows.extend(self._approx_rows(seed, delta, b))
            else:
                rows.extend(self._exact_rows(seed, delta, b))
        return rows

    def run(self) -> List[SweepRecord]:
        """Run every draw; rows are ordered by (seed, delta, model) whatever the completion order"""
        draws = range(self.config.noise_draws)
        workers = self.config.max_workers
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                batches = list(executor.map(self.run_draw, draws))
        else:
            batches = []
            for d in draws:
                batches.append(self.run_draw(d))
                self.run_logger.log_progress("Sweep", d + 1, self.config.noise_draws)

        order = {model: k for k, model in enumerate(ROW_MODELS)}
        records = sorted((r for batch in batches for r in batch),
                         key=lambda r: (r.seed, r.delta, order[r.model]))
        failures = set()
        for r in records:
            self.run_logger.log_sweep_row(r.model, r.seed, r.delta, r.satisfied)
            if r.error is not None:
                # one failed solve fills several rows of the same program
                key = (r.seed, r.delta, r.model.split("-")[0])
                if key not in failures:
                    failures.add(key)
                    self.run_logger.log_solver_failure(key[2], r.seed, r.error)
        return records


def records_to_frame(records: Sequence[SweepRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in records], columns=SWEEP_COLUMNS)


def write_csv(records: Sequence[SweepRecord], path: Optional[str] = None) -> None:
    """Write the sweep CSV to path, or to stdout when path is None or '-'"""
    frame = records_to_frame(records)
    target = sys.stdout if path in (None, "-") else path
    frame.to_csv(target, index=False, float_format="%.17g")
    if target is not sys.stdout:
        logger.info(f"Sweep CSV with {len(frame)} rows written to {path}")


def count_violations(records: Sequence[SweepRecord]) -> int:
    return sum(1 for r in records if not r.satisfied)
