"""Exception types raised across the pipeline."""


class HandshapeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HandshapeError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ValidationError(HandshapeError, ValueError):
    pass


class DimensionError(HandshapeError, ValueError):
    pass


class SegmentationEmpty(HandshapeError):
    """No pixel passed the glove color filter."""


class EmptyMask(HandshapeError, ValueError):
    pass


class EmptyTrainingSet(HandshapeError, ValueError):
    pass


class EmptySample(HandshapeError, ValueError):
    pass


class ModelFormatError(HandshapeError, ValueError):
    pass
