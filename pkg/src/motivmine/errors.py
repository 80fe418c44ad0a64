"""Shared exception types; the CLI maps these onto exit codes."""


class MotivmineError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(MotivmineError):
    """Invalid experiment configuration or CLI usage (exit code 2)."""


class DataError(MotivmineError):
    """Malformed input: datasets, dictionaries, stopword files (exit code 3)."""


class SchemaError(DataError):
    """Input file header or keys do not match the documented schema."""


class NumericalError(MotivmineError):
    """Numerical failure during feature computation or training (exit code 4)."""
