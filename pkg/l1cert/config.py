"""
Configuration: numerical tolerances and environment-derived settings
"""
import os
import logging
from dataclasses import dataclass, fields, replace, asdict
from typing import Any, Dict, Optional

from .errors import InvalidInputError

DEFAULT_SEED = 0


@dataclass(frozen=True)
class Tolerances:
    """Tolerances shared by every verification, LP and solver call.

    rank_tol is relative: singular values at or below rank_tol * sigma_max
    count as zero. None selects max(rows, cols) * machine epsilon per matrix.
    """
    rank_tol: Optional[float] = None
    feas_tol: float = 1e-9
    gap_tol: float = 1e-8
    strict_tol: float = 1e-9
    supp_tol: float = 1e-8
    solver_tol: float = 1e-8
    oracle_tol: float = 1e-7

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not value >= 0:
                raise InvalidInputError(f"Tolerance {f.name} must be non-negative, got {value}")
        if self.rank_tol is not None and self.rank_tol <= 0:
            raise InvalidInputError(f"rank_tol must be positive, got {self.rank_tol}")

    def with_overrides(self, **overrides: Any) -> "Tolerances":
        """Return a copy with some tolerances replaced (None values are ignored)"""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidInputError(f"Unknown tolerance(s): {', '.join(sorted(unknown))}")
        changes = {k: float(v) for k, v in overrides.items() if v is not None}
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Settings:
    """Process-level settings read from the environment"""
    seed: int = DEFAULT_SEED
    log_level: int = logging.INFO
    log_file: Optional[str] = None
    database_url: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        raw_seed = os.getenv("L1CERT_SEED")
        seed = DEFAULT_SEED
        if raw_seed not in (None, ""):
            try:
                seed = int(raw_seed)
            except ValueError:
                raise InvalidInputError(f"L1CERT_SEED must be an integer, got {raw_seed!r}")

        level_name = os.getenv("L1CERT_LOG_LEVEL", "INFO").upper()
        level = logging.getLevelName(level_name)
        if not isinstance(level, int):
            level = logging.INFO

        return cls(
            seed=seed,
            log_level=level,
            log_file=os.getenv("L1CERT_LOG_FILE") or None,
            database_url=os.getenv("L1CERT_DATABASE_URL") or None,
        )
