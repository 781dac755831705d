"""Exception hierarchy shared by all modules."""


class QDimerError(Exception):
    """Base class for every error raised by qdimer."""

    exit_code = 3


class ConfigError(QDimerError, ValueError):
    exit_code = 2


class DimensionError(ConfigError):
    """Requested product basis is larger than the configured maximum."""


class BasisMismatchError(QDimerError, ValueError):
    """Two objects that must share a basis do not."""


class NumericalError(QDimerError):
    exit_code = 3


class DiagonalizationError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SymmetryError(NumericalError):
    """A degenerate cluster could not be rotated onto exchange eigenvectors."""


class TrackingError(NumericalError):
    """Eigenvalue tracks could not be matched across a coupling sweep."""


class TruncationWarning(UserWarning):
    """A coherent state loses noticeable weight outside the truncated window."""
