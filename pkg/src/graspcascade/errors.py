"""Typed errors, grouped by the CLI exit code they map to."""


class ConfigError(Exception):
    """Bad configuration: missing files, wrong format_version, invalid values."""


class InputError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class SetupError(RuntimeError):
    """Environment setup failed, e.g. a prior-task policy exhausted its retry budget."""


class DataError(Exception):
    """Demonstration / checkpoint data is unusable."""


class HashMismatchError(DataError):
    pass


class VersionError(DataError):
    pass


class TruncatedFileError(DataError):
    pass


class DimensionError(DataError):
    pass


class CorruptEpisodeError(DataError):
    pass


class NumericError(RuntimeError):
    """A numeric failure (non-finite loss or state) aborted the operation."""
