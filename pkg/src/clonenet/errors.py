"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the region where the construction is defined
    (for example a machine parameter beyond its unitarity limit)."""


class CapacityError(ValueError):
    """The requested computation exceeds a supported size limit."""


class InvariantError(RuntimeError):
    """An internal consistency check failed; this indicates a construction bug."""
