"""fiolab: a desk-scale numerical laboratory for oscillatory integral
operators of wave type.

Phases, dyadic cutoffs, curvature-adaptive angular decompositions, a damped
averaging operator, its pseudodifferential factorization, and a CLI harness
of reproducible experiments probing L1 and weak-(1,1) behavior.
"""

__version__ = "0.1.0"

from .errors import (AccuracyError, BandError, ConfigError, DomainError,
                     FiolabError, InversionError, ResourceError)
from .phases import ConeSpec, make_phase

__all__ = [
    "AccuracyError", "BandError", "ConeSpec", "ConfigError", "DomainError",
    "FiolabError", "InversionError", "ResourceError", "make_phase",
    "__version__",
]
