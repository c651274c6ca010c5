"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the documented domain of an operation."""


class ResourceError(RuntimeError):
    """A search cap or size limit was exceeded."""
