"""Exception hierarchy shared by the library, service, and CLI.

The three leaf categories map onto CLI exit codes: ConfigError -> 1,
DataError/FormatError -> 2, anything else -> 3.
"""


class PudefectError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PudefectError):
    """Invalid configuration or argument values."""


class DataError(PudefectError):
    """Dataset violates a precondition (dimensions, labels, emptiness)."""


class FormatError(DataError):
    """A feature file does not conform to its declared format."""


class StageError(PudefectError):
    """A pipeline stage failed; message carries the stage name."""
