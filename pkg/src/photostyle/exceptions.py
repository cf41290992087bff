"""Exception hierarchy shared by every photostyle module."""


class PhotostyleError(Exception):
    """Base class for operational errors raised by photostyle."""


class DecodeError(PhotostyleError):
    pass


class UnsupportedFormatError(PhotostyleError):
    pass


class BoundsError(PhotostyleError, ValueError):
    pass


class ChannelError(PhotostyleError, ValueError):
    pass


class ShapeError(PhotostyleError, ValueError):
    pass


class LabelError(PhotostyleError, ValueError):
    pass


class CascadeFormatError(PhotostyleError):
    """Malformed or invalid cascade file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFormatError(PhotostyleError):
    pass


class TrainingDivergedError(PhotostyleError):
    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration} (loss={loss})")


class SplitError(PhotostyleError, ValueError):
    pass


class ReviewError(PhotostyleError):
    """Malformed verdict or review row that references no queue entry."""


class EvaluationError(PhotostyleError, ValueError):
    pass


class ManifestError(PhotostyleError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(PhotostyleError):
    pass


class ReferenceIntegrityError(PhotostyleError):
    pass


class JoinError(PhotostyleError):
    def __init__(self, message, unmatched=()):
        self.unmatched = list(unmatched)
        super().__init__(message)


class CollinearityError(PhotostyleError, ValueError):
    def __init__(self, message, columns=()):
        self.columns = list(columns)
        super().__init__(message)


class IdentificationError(PhotostyleError, ValueError):
    pass


class InsufficientDataError(PhotostyleError, ValueError):
    pass


class PlotError(PhotostyleError, ValueError):
    pass


class ConfigError(PhotostyleError):
    pass
