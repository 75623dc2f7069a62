"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a formula or operation."""


class MalformedCodeError(DomainError):
    """A Prufer code contains a label outside ``0..n-1`` or has the wrong length."""


class InvalidTreeError(DomainError):
    """An edge list does not describe a tree (or a forest, for patterns)."""


class ResourceLimitError(RuntimeError):
    """The requested enumeration or search exceeds a configured size limit."""
