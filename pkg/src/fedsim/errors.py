"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Raised when inputs violate a structural precondition (shapes, ranges, keys)."""


class UndefinedMetricError(ValueError):
    """Raised when a metric is requested on data for which it is undefined."""
