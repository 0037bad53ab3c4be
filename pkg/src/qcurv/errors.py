"""Exception hierarchy for qcurv.

Input problems subclass ValueError and map to exit code 2; numerical failures
subclass RuntimeError and map to exit code 3.
"""

EXIT_OK = 0
EXIT_CHECK_FAILURES = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3


class QCurvError(Exception):
    """Base class for all qcurv errors."""

    exit_code = EXIT_INVALID_INPUT


# =============================================================================
# Input errors
# =============================================================================


class InvalidInputError(QCurvError, ValueError):
    """Invalid user input."""


class InvalidDimension(InvalidInputError):
    """Dimension n outside the supported range (n >= 2)."""

    def __init__(self, n):
        super().__init__(f"invalid dimension n={n}: need an integer n >= 2")
        self.n = n


class InvalidSpec(InvalidInputError):
    """Malformed spec or suite file; carries every violation found."""

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(InvalidInputError):
    """Argument outside the mathematical domain of an operation."""


class OperandNotInDomain(InvalidInputError):
    """Operand fails the decay or integrability requirement of an operator."""

    def __init__(self, message: str, factor: str = ""):
        super().__init__(message)
        self.factor = factor


class InsufficientSmoothness(InvalidInputError):
    """Too many derivatives requested from a sampled profile."""


class OracleInapplicable(InvalidInputError):
    """The Fourier oracle needs a rapidly decaying operand."""


class UnsupportedCheck(InvalidInputError):
    """A check was requested outside its documented scope."""


class FiniteTotalQViolated(InvalidInputError):
    """The Q-curvature density is not integrable."""


# =============================================================================
# Numerical failures
# =============================================================================


class NumericalError(QCurvError, RuntimeError):
    """Numerical procedure failed."""

    exit_code = EXIT_NUMERICAL_FAILURE


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not converge within its budget."""

    def __init__(self, message: str, estimate: float = float("nan"), error_bound: float = float("inf")):
        super().__init__(f"{message} (estimate={estimate:.6g}, error bound={error_bound:.3g})")
        self.estimate = estimate
        self.error_bound = error_bound


class PVDivergent(NumericalError):
    """Singularity stronger than first order: no principal value exists."""


class IllPosedFit(NumericalError):
    """Least-squares problem is rank deficient."""


class Inconclusive(NumericalError):
    """Finite data cannot decide the requested property."""
