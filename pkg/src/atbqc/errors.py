"""Exception hierarchy. Everything raised on bad data derives from AtbqcError."""


class AtbqcError(Exception):
    """Base class for data and validation errors (CLI exit status 1)."""


class InvalidContourError(AtbqcError):
    pass


class ContractViolation(AtbqcError):
    pass


class DegenerateContourError(AtbqcError):
    pass


class RangeError(AtbqcError):
    pass


class EmptyInputError(AtbqcError):
    pass


class DatasetError(AtbqcError):
    """Dataset loading/validation failure with file and line location."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class MissingFileError(DatasetError):
    pass


class MalformedRowError(DatasetError):
    pass


class OutOfBoundsError(DatasetError):
    pass


class NonContiguousFramesError(DatasetError):
    pass


class UnsupportedVersionError(DatasetError):
    pass


class ConfigurationError(AtbqcError):
    pass


class MissingReferenceError(ConfigurationError):
    pass


class UncorrectableVideoError(AtbqcError):
    pass


class RasterRequiredError(AtbqcError):
    pass


class RegionUndefinedError(AtbqcError):
    pass


class ThresholdUndefinedError(AtbqcError):
    pass


class EvaluationImpossibleError(AtbqcError):
    pass
