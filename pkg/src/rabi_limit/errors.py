"""Exception types raised by the library."""


class RabiLimitError(Exception):
    """Base class for all library errors."""


class DomainError(RabiLimitError, ValueError):
    """An argument lies outside the domain of a function."""


class DegreeBoundError(RabiLimitError, ValueError):
    """A polynomial degree exceeds the supported bound."""


class TruncationError(RabiLimitError):
    """A truncated Fock-space representation lost too much weight."""


class FrameError(RabiLimitError):
    """Unknown frame tag, or states compared in different frames."""


class ConvergenceError(RabiLimitError):
    """A series or iteration did not reach its tolerance."""


class AccuracyWarning(UserWarning):
    """Evaluation outside the accuracy-certified region."""


class SamplingWarning(UserWarning):
    """A sampled quantity moved more than its tolerance when resampled."""


class GridError(RabiLimitError, ValueError):
    """A grid or point set is too small or degenerate for the requested fit."""


class ConfigError(RabiLimitError, ValueError):
    """A run configuration is invalid."""
