"""Exception hierarchy and process exit codes.

Every error raised by this package derives from :class:`BiphotonError` and
carries an ``exit_code`` so the command line interface can map failures onto
distinct process statuses: 2 for configuration problems, 3 for malformed
input files or streams, 4 for analyses that lack the data they need.
"""

EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_INSUFFICIENT_DATA = 4


class BiphotonError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigurationError(BiphotonError):
    """Invalid parameters, labels, matrices, or configuration files."""

    exit_code = EXIT_CONFIG


class ModelError(BiphotonError):
    """A physical-model precondition was violated."""

    exit_code = EXIT_CONFIG


class DegenerateStateError(ModelError):
    """A superposition summed to the zero vector."""


class EmptyPostselectionError(ModelError):
    """A postselection predicate kept no outcome with nonzero weight."""


class UndefinedCorrelationError(ModelError):
    """A correlation was requested where the rate denominator vanishes."""


class CalibrationRangeError(ConfigurationError):
    """A temperature outside the calibrated range was requested."""


class DomainError(ConfigurationError):
    """A numeric argument was outside its valid domain."""


class FormatError(BiphotonError):
    """A binary time-tag file violated the format contract.

    ``byte_offset`` locates the first offending byte when known.
    """

    exit_code = EXIT_FORMAT

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class StreamError(FormatError):
    """A time-tag stream violated an ordering or channel precondition."""


class InsufficientDataError(BiphotonError):
    """Not enough data points or counts to carry out the computation."""

    exit_code = EXIT_INSUFFICIENT_DATA
