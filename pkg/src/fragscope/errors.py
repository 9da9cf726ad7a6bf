"""Exception and warning types shared across the package."""


class FragscopeError(Exception):
    """Base class for all package errors."""


class ValidationError(FragscopeError):
    """An input violates a documented invariant or precondition."""


class InsufficientDataError(ValidationError):
    """Too few rows/groups to evaluate the requested quantity."""


class UnsupportedArityError(ValidationError):
    """Operation is only stated for a fixed number of components (m = 2)."""


class ConfigurationError(ValidationError):
    """A configuration is internally inconsistent or geometrically infeasible."""


class FormatError(FragscopeError):
    """A file does not conform to its declared on-disk format."""


class DegenerateMixtureWarning(UserWarning):
    """Normalized MI hit the 0/0 case (all factor entropies zero); defined as 0."""


class SingletonGroupWarning(UserWarning):
    """A group with a single row has no pairs; its diversity is defined as 1."""
