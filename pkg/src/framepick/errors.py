"""Exception taxonomy shared across the package."""


class FramepickError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(FramepickError, ValueError):
    """Vector lengths or tensor shapes disagree."""


class ConsistencyError(FramepickError, ValueError):
    """Values are individually valid but mutually inconsistent."""


class DomainError(FramepickError, ValueError):
    """An input falls outside the mathematical domain of an operation."""


class ConfigError(FramepickError, ValueError):
    """A configuration object or file is invalid."""


class EpisodeStateError(FramepickError, RuntimeError):
    """An environment method was called in the wrong lifecycle state."""


class CalibrationError(FramepickError, RuntimeError):
    """Noise calibration could not reach the requested target."""


class ProtocolError(FramepickError, RuntimeError):
    """A malformed message was seen on the environment wire protocol."""


class TransportError(FramepickError, RuntimeError):
    """The environment wire transport failed (timeout, closed stream)."""


class RemoteEnvError(FramepickError, RuntimeError):
    """The remote environment reported an error for a command."""


class FormatError(FramepickError, ValueError):
    """A parameter or report file does not match the expected format."""


class NumericError(FramepickError, ArithmeticError):
    """A non-finite value appeared where finite math was required."""
