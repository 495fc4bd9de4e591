"""Exception hierarchy shared across the package.

``InputError`` subclasses map to CLI exit code 2, ``InternalError`` to 3.
"""


class PolarError(Exception):
    pass


class InputError(PolarError):
    """Bad user-supplied data or configuration."""


class InternalError(PolarError):
    """A package invariant was violated; indicates a bug, not bad input."""


class LoadError(InputError):
    """Malformed or inconsistent model_dir contents."""


class TokenCollisionError(InputError):
    """Two distinct user ids hashed to the same token."""


class MissingUserTokenError(InputError):
    """User token absent from the vocabulary; caller may skip and count."""


class DegenerateVectorError(InputError):
    """Zero-norm embedding row cannot be normalized."""


class EmptySideError(InputError):
    """One side of an attribute pair has no usable items."""


class TooLargeError(InputError):
    """Exhaustive enumeration would exceed the combinatorial bound."""


class StratificationError(InputError):
    """Labels cannot be stratified as requested."""


class UndefinedMetricError(InputError):
    """Metric is undefined for the given inputs (e.g. single-class AUROC)."""
