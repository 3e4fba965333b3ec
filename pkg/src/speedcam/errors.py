"""Exception types shared across the pipeline.

Two broad families matter to callers: usage/validation problems (bad input
documents, bad arguments) and runtime/data failures (unusable frames,
degenerate fits). The API layer maps the first family to HTTP 400 and the
second to HTTP 422; the CLI turns those into exit codes 2 and 1.
"""

from __future__ import annotations


class SpeedcamError(Exception):
    """Base class for all errors raised by this package."""


# --- input / document problems (usage errors) ---------------------------


class ParseError(SpeedcamError):
    """A document is not syntactically well formed."""


class ValidationError(SpeedcamError):
    """A document parsed but violates an invariant (message names the field)."""


class MissingFileError(SpeedcamError):
    """A referenced file does not exist."""


class SchemaMismatchError(SpeedcamError):
    """A model/features file does not match the expected schema."""


class MaskValueError(SpeedcamError, ValueError):
    """A mask payload byte is outside {0, 1}."""


# --- raster decode failures ----------------------------------------------


class BadMagicError(SpeedcamError):
    """A raster file does not start with the expected magic bytes."""


class TruncatedFileError(SpeedcamError):
    """A raster file ends before the payload its header promises."""


class NonFiniteValueError(SpeedcamError):
    """A depth raster carries NaN or infinite values."""


class IoError(SpeedcamError):
    """An OS-level read/write failure."""


# --- extraction failures --------------------------------------------------


class NoVehicleError(SpeedcamError):
    """No detection survived the class/confidence filter."""


class EmptyRegionError(SpeedcamError):
    """The depth aggregation region contains no pixels."""


class DimensionMismatchError(SpeedcamError):
    """Mask and depth raster dimensions differ."""


class InsufficientFramesError(SpeedcamError):
    """A sample has fewer than two frames."""


# --- regression failures --------------------------------------------------


class RankDeficiencyError(SpeedcamError):
    """The design matrix is numerically rank deficient."""

    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = columns or []


class ZeroVarianceError(SpeedcamError):
    """R^2 is undefined because the actual values are constant."""


class DegenerateDofError(SpeedcamError):
    """Adjusted R^2 is undefined because n <= p + 1."""


class TooFewSamplesError(SpeedcamError):
    """Not enough records to produce nonempty train and test parts."""


# --- synthetic scene failures ----------------------------------------------


class GeometryError(SpeedcamError):
    """The vehicle would reach or pass the camera, or not fit in frame."""


class InfeasibleRangesError(SpeedcamError):
    """Parameter ranges never produced a valid scenario within the retry budget."""


USAGE_ERRORS = (
    ParseError,
    ValidationError,
    MissingFileError,
    SchemaMismatchError,
    MaskValueError,
)
