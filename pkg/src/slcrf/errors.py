"""Exception hierarchy for slcrf."""


class SlcrfError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SlcrfError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class ConfigError(SlcrfError, ValueError):
    """A configuration or architecture is invalid."""


class DivergenceError(SlcrfError, ArithmeticError):
    """Numerical divergence detected during optimisation.

    The partial training trace is attached as ``trace`` when available.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class FormatError(SlcrfError, ValueError):
    """A file on disk does not follow the expected container format."""


class LengthMismatchError(FormatError):
    """Payload length disagrees with its header."""


class DtypeError(FormatError):
    """Unsupported or unknown dtype declared in a header."""


class ClassIdError(FormatError):
    """A label grid contains a class id larger than the declared count."""
