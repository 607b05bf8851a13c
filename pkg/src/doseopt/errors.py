"""Shared exception types."""


class ResourceLimitError(RuntimeError):
    """A computation exceeded a configured size or iteration cap."""
