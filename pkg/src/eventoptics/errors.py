"""Exception types shared across the package."""


class EventOpticsError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(EventOpticsError, ValueError):
    """A numeric argument is outside its admissible range."""


class InvalidMessageError(EventOpticsError, ValueError):
    """A message vector is not a unit two-vector."""


class AbsorbedRayError(EventOpticsError):
    """The messenger cannot leave the glass (total internal reflection)."""


class ConfigurationError(EventOpticsError, ValueError):
    """An experiment configuration violates its invariants."""


class NumericalFailureError(EventOpticsError, RuntimeError):
    """Quadrature did not reach the requested tolerance."""


class DegenerateFitError(EventOpticsError, ValueError):
    """A least-squares comparison has no information (all-zero input)."""


class MergeError(EventOpticsError, ValueError):
    """Replica profiles do not share the same detector geometry."""
