"""Exception hierarchy shared by every pipeline component.

``ParseError`` means an input document is syntactically broken.  Everything
else derives from ``PipelineError`` and signals either an invariant violation
in otherwise well-formed data (``ValidationError`` and friends) or a domain
outcome that callers must handle explicitly (``NoCrossing``, ``AllZero``).
The CLI maps ``ParseError`` to exit code 1 and every other ``PipelineError``
to exit code 2.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PipelineError):
    """Input document is malformed at the syntax level.

    ``source`` and ``line`` locate the defect when they are known.
    """

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f" [{source}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class ValidationError(PipelineError):
    """Well-formed input that violates a data invariant."""


class InvalidRatio(ValidationError):
    """Dataset split ratios are not positive or do not sum to one."""


class InvalidGeometry(ValidationError):
    """Degenerate box or impossible tile-grid geometry."""


class UnknownTile(ValidationError):
    """A tile id does not exist in the grid."""


class OutOfTileBounds(ValidationError):
    """A box does not fit inside the tile it is attributed to."""


class ImageMismatch(ValidationError):
    """Detections reference an image absent from the ground truth."""


class EmptyGroundTruth(ValidationError):
    """Precision/recall is undefined without ground-truth boxes."""


class ZeroGroundTruthCount(ValidationError):
    """A ground-truth count of zero makes the percentage error undefined."""


class InsufficientData(ValidationError):
    """Too few observations for the requested fit."""


class DegenerateDesign(ValidationError):
    """Repeated sample days make the least-squares system singular."""


class InvalidSpec(ValidationError):
    """Synthetic scenario parameters are out of range."""


class NoCrossing(PipelineError):
    """The fitted curve never rises through the half-of-ultimate level."""


class AllZero(PipelineError):
    """Every observed count is zero, so the half level is undefined."""
