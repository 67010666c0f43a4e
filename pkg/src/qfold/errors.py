"""Exception types shared across the package."""


class QfoldError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QfoldError, ValueError):
    """A configuration value is missing, inconsistent, or out of range."""


class GateError(QfoldError, ValueError):
    """A gate was given an invalid wiring (e.g. control == target)."""


class DimensionError(QfoldError, ValueError):
    """Operands have incompatible qubit counts or array shapes."""


class StateError(QfoldError, ValueError):
    """An amplitude vector or density matrix violates its invariants."""


class EncodingError(QfoldError, ValueError):
    """A data grid cannot be amplitude-encoded (e.g. all pixels dark)."""


class SamplingError(QfoldError, ValueError):
    """A dataset draw was requested that the population cannot supply."""


class ParameterError(QfoldError, ValueError):
    """A parameter vector does not match its circuit template."""


class ImpossibleOutcomeError(QfoldError):
    """Post-selection was requested on an outcome with (near-)zero probability."""


class NotProductError(QfoldError):
    """A state is too entangled to split into subsystem factors."""


class OrthogonalSupportsError(QfoldError):
    """The two subsystem factors share no computational basis element."""


class CorruptCompactStateError(QfoldError):
    """A folded state is missing one of its ancilla branches."""


class DegenerateBranchError(QfoldError):
    """A branch weight is too small for the rebalanced gradient to be defined."""


class TrainingDivergenceError(QfoldError):
    """Training produced a non-finite cost; carries the trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
