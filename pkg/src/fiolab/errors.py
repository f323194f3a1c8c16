"""Exception hierarchy shared by all fiolab modules."""


class FiolabError(Exception):
    """Base class for everything raised on purpose."""


class DomainError(FiolabError):
    """Input outside the supported domain (cone violation, bad sample point)."""


class BandError(FiolabError):
    """Frequency content outside the grid's Nyquist band."""


class AccuracyError(FiolabError):
    """A quadrature or fit failed to reach its requested accuracy."""


class InversionError(FiolabError):
    """Newton inversion of a gradient map did not converge."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ConsistencyError(FiolabError):
    """Two computations that must agree produced incompatible results."""


class ConfigError(FiolabError):
    """Malformed or inconsistent run configuration."""


class ResourceError(FiolabError):
    """A computation would exceed its configured memory or time budget."""
