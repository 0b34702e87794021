"""Exception types shared across the package.

Every domain failure raises a subclass of :class:`EvalError` so the CLI can
map them to exit code 1 while genuine bugs propagate normally.
"""


class EvalError(Exception):
    """Base class for all recoverable domain errors."""


class ImageError(EvalError):
    """Unreadable, malformed, or out-of-contract image file."""


class ManifestError(EvalError):
    """Malformed evaluation or study manifest."""


class MetricError(EvalError):
    """Metric precondition violated (dimensions, ranges, window sizes)."""


class ArchParseError(EvalError):
    """Architecture notation string could not be parsed."""


class ArchShapeError(EvalError):
    """Shape propagation failed (underflow or channel mismatch)."""


class StudyError(EvalError):
    """Perceptual-study session violation (tokens, ratings, state)."""
