"""Exception types raised across the package."""


class FemdaError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefinite(FemdaError, ValueError):
    pass


class DimensionMismatch(FemdaError, ValueError):
    pass


class InvalidRange(FemdaError, ValueError):
    pass


class InvalidShape(FemdaError, ValueError):
    """Shape parameter (beta or nu) of a generator is not positive."""


class ConfigInvalid(FemdaError, ValueError):
    pass


class TooFewPoints(FemdaError, ValueError):
    pass


class NumericalBreakdown(FemdaError, ArithmeticError):
    """Raised when a ridge-regularised retry still fails to factorise."""


class ClassTooSmall(FemdaError, ValueError):
    def __init__(self, label, size, required):
        super().__init__(f"class {label!r} has {size} points, {required} required")
        self.label = label
        self.size = size
        self.required = required


class EstimationFailed(FemdaError, RuntimeError):
    def __init__(self, label, cause):
        super().__init__(f"estimation failed for class {label!r}: {cause}")
        self.label = label
        self.cause = cause


class MissingThreshold(FemdaError, ValueError):
    pass


class MissingCenter(FemdaError, KeyError):
    pass


class EmptyDataset(FemdaError, ValueError):
    pass


class ParseError(FemdaError, ValueError):
    def __init__(self, line, column, message=""):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class EmptyFile(FemdaError, ValueError):
    pass


class AllRowsDropped(FemdaError, ValueError):
    pass


class AllClassesDropped(FemdaError, ValueError):
    pass
