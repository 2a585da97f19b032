"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class WorkloadError(RuntimeError):
    """Workload generation cannot proceed (empty pool, bad window, ...)."""


class CacheError(RuntimeError):
    """A cache operation was invoked in an invalid state."""


class MetricsError(RuntimeError):
    """A metrics computation received unusable input."""


class InvariantViolation(AssertionError):
    """A runtime self-check failed during a simulation."""
