"""Exception taxonomy shared across the package.

ConfigError maps to CLI exit code 2, DataError to exit code 3.
"""


class DiffgraphError(Exception):
    """Base class for package errors."""


class ConfigError(DiffgraphError):
    """Invalid configuration: bad parameter values, schema violations, unknown keys."""


class DataError(DiffgraphError):
    """Invalid data at runtime: malformed files, dimension mismatches, degenerate inputs."""


class TrainingDivergedError(DiffgraphError):
    """A non-finite value appeared in a loss or parameter during training."""
