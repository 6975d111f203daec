"""Exception hierarchy used to map failures to process exit codes."""


class TrajbenchError(Exception):
    """Base class for toolkit errors."""


class ConfigError(TrajbenchError):
    """Bad configuration or usage (exit code 1)."""


class DataError(TrajbenchError):
    """Unreadable or malformed input data (exit code 2)."""


class BenchmarkError(TrajbenchError):
    """Systemic benchmark failure (exit code 3)."""
