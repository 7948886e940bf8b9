"""Exception hierarchy."""


class PathWitError(Exception):
    """Base class for every error raised by pathwit."""


class InvalidDimensionError(PathWitError, ValueError):
    pass


class InvalidParameterError(PathWitError, ValueError):
    pass


class InvalidArgumentError(PathWitError, ValueError):
    pass


class ShapeError(PathWitError, ValueError):
    pass


class ContractViolationError(PathWitError, ValueError):
    """An input breaks a documented precondition (e.g. non-Hermitian)."""


class InvalidDataError(PathWitError, ValueError):
    """Measured statistics are malformed (not normalized, out of range, ...)."""


class TruncationError(PathWitError, ValueError):
    """Fock cutoff too small for the requested state."""


class NormalizationMismatchError(PathWitError, ValueError):
    """Quantities computed under different witness normalizations were mixed."""


class NonConvergenceError(PathWitError, RuntimeError):
    """The SDP solver exhausted its budget. ``solution`` holds the flagged result."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ConfigError(PathWitError, ValueError):
    pass
