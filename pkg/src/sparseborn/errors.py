"""Exception types raised by the public API."""


class SparsebornError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SparsebornError, ValueError):
    """Tensor dimension counts or index bounds do not match."""


class SchemaError(SparsebornError, ValueError):
    """Input data is missing required columns or fields."""


class ParseError(SparsebornError, ValueError):
    """A data stream could not be parsed.

    ``line`` is the 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidRecordError(SparsebornError, ValueError):
    """A record violates the requirements of the current operation."""


class ArchiveError(SparsebornError, ValueError):
    """A model archive is malformed or has an unsupported version."""


class UnknownTargetError(SparsebornError, KeyError):
    """A requested target label is not present in the model vocabulary."""

    def __init__(self, target, valid):
        self.target = target
        self.valid = list(valid)
        shown = ", ".join(map(str, self.valid[:20]))
        if len(self.valid) > 20:
            shown += ", ..."
        super().__init__(f"unknown target {target!r}; valid targets: {shown}")

    def __str__(self):
        return self.args[0]
