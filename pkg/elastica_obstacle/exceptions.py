"""Error kinds raised by the library.

All of them derive from ValueError so callers that only know about bad
arguments keep working.
"""


class ElasticaError(ValueError):
    """Base class for library errors."""


class DomainError(ElasticaError):
    """Argument outside the domain of a function."""


class AssumptionViolation(ElasticaError):
    """Shape function or obstacle violates a standing assumption."""


class ThresholdError(ElasticaError):
    """Requested cone height is at or above the existence threshold."""


class UnsupportedObstacleError(ElasticaError):
    """Operation only defined for a narrower obstacle class."""


class SlopeBlowupError(ElasticaError):
    """Reconstructed slope leaves the range of G."""


class InfeasibleIterateError(ElasticaError):
    """Grid function lies below the obstacle."""


class ConfigError(ElasticaError):
    """Invalid run configuration or command-line usage."""
