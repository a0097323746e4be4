"""Exception hierarchy.

Every error raised by this package derives from :class:`DoobkitError`, so
callers can catch one base type at API boundaries.  The subtypes split along
the lines the CLI needs for its exit codes: problems with the *inputs*
(shape, validation, domain, resources) versus a *mathematical check* that
failed on well-formed inputs.
"""

from __future__ import annotations


class DoobkitError(Exception):
    """Base class for all errors raised by doobkit."""


class ValidationError(DoobkitError):
    """Malformed object: bad probabilities, labels, grids, or model files."""


class DimensionError(ValidationError):
    """Array shapes or index ranges do not line up."""


class DomainError(ValidationError):
    """A numeric argument is outside its mathematical domain."""


class ModelError(ValidationError):
    """A model specification cannot be parsed or instantiated."""


class ResourceError(ValidationError):
    """The request exceeds a documented size budget."""


class MeasurabilityError(DoobkitError):
    """A value that must be constant on partition blocks is not."""


class MonotonicityError(DoobkitError):
    """A path that must be nondecreasing decreases beyond tolerance."""


class NotMartingaleError(DoobkitError):
    """A process required to be a martingale fails the defining identity."""


class NotSubmartingaleError(DoobkitError):
    """A process required to be a submartingale has a negative drift step."""


class MalformedDecompositionError(DoobkitError):
    """A claimed decomposition violates one of its structural invariants."""


class ConsistencyError(DoobkitError):
    """Two inputs that must describe the same object disagree."""
