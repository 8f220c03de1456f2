"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file exists but its contents are not in the expected format."""


class ConfigurationError(RuntimeError):
    """The run configuration references an artifact that is missing or inconsistent."""
