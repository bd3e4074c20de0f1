"""Exception types raised across the package."""


class OrdfemError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(OrdfemError, ValueError):
    pass


class TopologyError(OrdfemError):
    pass


class GeometryError(OrdfemError):
    pass


class DegenerateSystemError(OrdfemError):
    """An assembled system has an empty unknown block."""


class SingularSystemError(OrdfemError):
    pass


class IterationLimitError(OrdfemError):
    pass


class DecompositionFailureError(OrdfemError):
    """A target could not be reconstructed from the two summands."""


class SizeError(OrdfemError):
    """A dense code path was asked to handle more unknowns than its cap."""
