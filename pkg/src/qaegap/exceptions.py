"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so new error types should subclass one
of the four roots below.
"""


class QaeGapError(Exception):
    """Base class for all package errors."""


class InstanceValidationError(QaeGapError, ValueError):
    """An instance, file, or configuration value violates its contract."""


class InstanceFormatError(InstanceValidationError):
    """An instance file does not match the schema.

    ``field`` names the offending JSON path (``"edges[2].w"``).
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(InstanceValidationError):
    """A numeric argument lies outside the domain of the method."""


class ResourceLimitError(QaeGapError):
    """A size cap (qubits, enumeration) would be exceeded."""


class NumericalError(QaeGapError):
    """Base for numerical failures (non-convergence, singular systems)."""


class SolverError(NumericalError):
    """An eigensolver failed to reach its residual target."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class ConvergenceError(NumericalError):
    """A fixed-point iteration ran out of iterations.

    The last iterate is kept on ``state`` so callers can inspect it.
    """

    def __init__(self, message, residual=None, state=None):
        self.residual = residual
        self.state = state
        super().__init__(message)


class NearResonanceError(NumericalError):
    """The response equation is (nearly) singular at the probe frequency."""

    def __init__(self, message, omega_estimate=None):
        self.omega_estimate = omega_estimate
        super().__init__(message)


class DegenerateGapError(NumericalError):
    """A quantity that divides by the gap was asked for at zero gap."""


class InvalidStateError(QaeGapError, ValueError):
    """An object was used before it reached a valid (converged) state."""


class StepSizeError(NumericalError):
    """The propagator lost norm beyond tolerance; use a smaller step."""


class ScanError(NumericalError):
    """Every point of a gap scan failed."""
