"""Exception types shared across the toolchain."""


class MetatuneError(Exception):
    """Base class for all errors raised by metatune."""


class FormatError(MetatuneError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VersionError(FormatError):
    pass


class DimensionMismatch(MetatuneError):
    pass


class EmptyTrainingSet(MetatuneError):
    pass


class SpawnFailure(MetatuneError):
    """The backend executable could not be started at all."""


class DegenerateSplit(MetatuneError):
    pass


class BenchmarkMismatch(MetatuneError):
    pass
