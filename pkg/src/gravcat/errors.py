"""Exception hierarchy.

Every error raised by the library derives from :class:`GravcatError`. Parse
failures derive from :class:`ParseError` and carry the offending line (and
column, where meaningful) so the CLI can report them without a traceback.
"""


class GravcatError(Exception):
    """Base class for all library errors."""


class ComputationError(GravcatError):
    """An analysis could not be carried out on otherwise well-formed inputs."""


class InvalidCoordinate(ComputationError, ValueError):
    pass


class EmptyPopulation(ComputationError):
    pass


class InvalidDuration(ComputationError, ValueError):
    pass


class InsufficientData(ComputationError):
    pass


class InsufficientVariation(ComputationError):
    pass


class ThresholdExceedsPrune(ComputationError):
    pass


class UnknownKind(ComputationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownParams(ComputationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ModeMismatch(ComputationError):
    pass


class DimensionMismatch(ComputationError):
    pass


class KeyMismatch(ComputationError):
    pass


class InvalidSpeed(ComputationError, ValueError):
    pass


class MissingGeometry(ComputationError):
    pass


class MissingIndex(ComputationError):
    pass


class UnknownZone(ComputationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidConfig(ComputationError, ValueError):
    pass


class ParseError(GravcatError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        parts = []
        if source is not None:
            parts.append(str(source))
        if line is not None:
            parts.append(f"line {line}")
        if column is not None:
            parts.append(f"column {column}")
        where = ", ".join(parts)
        super().__init__(f"{where}: {message}" if where else message)
        self.message = message


class MissingHeader(ParseError):
    pass


class BadFieldCount(ParseError):
    pass


class UnparsableNumber(ParseError):
    pass


class NegativeCount(ParseError):
    pass


class DuplicateZone(ParseError):
    pass


class BadValue(ParseError):
    """A field parsed but holds a value outside its domain (unknown mode, empty id, ...)."""
