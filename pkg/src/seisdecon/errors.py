"""Exception types shared across the package."""


class SeisDeconError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SeisDeconError, ValueError):
    pass


class InvalidStateError(SeisDeconError, RuntimeError):
    pass


class NumericError(SeisDeconError, FloatingPointError):
    """A NaN/Inf appeared where finite values are required."""


class DivergedError(NumericError):
    def __init__(self, iteration, objective):
        self.iteration = iteration
        self.objective = objective
        super().__init__(
            f"solver diverged at iteration {iteration} (objective={objective:.3e})")


class UndefinedMetricError(SeisDeconError, ValueError):
    pass


class FormatError(SeisDeconError):
    """Malformed file. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnsupportedVersionError(FormatError):
    pass


class ConfigError(SeisDeconError, ValueError):
    pass
