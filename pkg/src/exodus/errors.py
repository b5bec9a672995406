"""Shared exception types and CLI exit codes."""

# Stable exit-code contract for the command line tool.
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class ExodusError(Exception):
    """Base class for all package errors."""


class DataError(ExodusError):
    """Invalid, missing, or inconsistent input data (exit code 2)."""


class SchemaError(DataError):
    """Input does not match the expected record schema."""


class CacheVersionError(DataError):
    """Cache written by an incompatible format version."""


class CohortError(DataError):
    """Cohort construction rules violated (e.g. labeling a user with no
    pre-intervention activity)."""


class ConfigError(ExodusError):
    """Invalid run configuration (exit code 1)."""


class StaleArtifactError(DataError):
    """A stage was run against an upstream artifact whose hash changed."""
