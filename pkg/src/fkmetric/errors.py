"""Error types shared across the package, mapped to CLI exit codes."""


class ConfigurationError(ValueError):
    """A system/partition/experiment spec is malformed (CLI exit 2)."""


class UsageError(ValueError):
    """An operation was called with incompatible or invalid arguments (CLI exit 2)."""


class RefusalError(RuntimeError):
    """The requested instance exceeds a documented size limit (CLI exit 3)."""
