"""Simulated quantum cloning networks and their correlation diagnostics."""

__version__ = "0.1.0"

from .errors import CapacityError, DomainError, InvariantError  # noqa: E402

__all__ = ["CapacityError", "DomainError", "InvariantError", "__version__"]
