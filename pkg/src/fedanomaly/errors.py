"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: shapes, widths, enum values, grid definitions."""


class UsageError(RuntimeError):
    """An operation was called out of order or with mismatched inputs."""


class NumericError(ArithmeticError):
    """A non-finite value appeared in a forward pass, loss or score."""


class SchemaError(ValueError):
    """A dataset file does not match its schema."""


class MetricError(ValueError):
    """A metric is undefined for the given labels (e.g. a single class)."""
