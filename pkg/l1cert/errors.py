"""
Exception hierarchy for the l1cert package.
Library code raises these; the CLI maps them to exit codes.
"""
from typing import Any, Optional


class L1CertError(Exception):
    """Base class for all l1cert errors"""


class InvalidInputError(L1CertError, ValueError):
    """Malformed, non-finite or dimensionally inconsistent input"""


class EmptySubspaceError(L1CertError):
    """An operation needs at least one basis vector but got none"""


class AssumptionViolationError(L1CertError):
    """A standing assumption (full row rank of Phi or Psi) does not hold"""


class InfeasibleError(L1CertError):
    """The optimization problem has no feasible point"""


class UnboundedError(L1CertError):
    """The optimization problem is unbounded"""


class NotConvergedError(L1CertError):
    """An iterative method stopped before reaching its tolerance"""

    def __init__(self, message: str, result: Any = None, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.result = result
        self.diagnostics = diagnostics or {}


class KernelConditionError(L1CertError):
    """Ker(Psi_J^T) and Ker(Phi) intersect nontrivially"""


class UnboundedRatioError(KernelConditionError):
    """r(J) is infinite because the kernel condition fails"""


class InvalidCertificateError(L1CertError):
    """The dual certificate has no positive strictness gap"""


class UnsupportedError(L1CertError):
    """The request exceeds a hard computational budget"""

    def __init__(self, message: str, lower_bound: Optional[float] = None):
        super().__init__(message)
        self.lower_bound = lower_bound


class InstanceFileError(L1CertError):
    """An instance file is missing, unreadable or malformed"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column
