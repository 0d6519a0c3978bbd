"""Exceptions and warning categories used across the package.

Grouped in one module so the CLI can map error families onto exit codes
without importing every subsystem.
"""


class GaitError(Exception):
    """Base class for all errors raised by this package."""


class GaitDataError(GaitError):
    """Invalid input data, files, or data-derived preconditions."""


# --- depth-frame ingestion --------------------------------------------------

class MissingMeta(GaitDataError):
    """meta.json sidecar is absent."""


class InvalidMeta(GaitDataError):
    """meta.json is unparseable or violates its schema."""


class FrameSizeMismatch(GaitDataError):
    """Frames in one sequence disagree on (width, height)."""


class CorruptPgm(GaitDataError):
    """PGM file is not binary P5 with maxval 65535, or payload truncated."""


class MetaArityMismatch(GaitDataError):
    """Per-frame metadata arrays do not match the frame count."""


class HeadBelowGround(GaitDataError):
    """Head pixel row is at or below the ground row."""


class EmptySilhouette(GaitDataError):
    """Frame (or whole-body mask) contains no foreground pixels."""


class InvalidFrame(GaitDataError):
    """Depth frame violates basic shape constraints."""


# --- synthetic generator ----------------------------------------------------

class InvalidParams(GaitDataError):
    """Synthetic-walk parameters outside their documented ranges."""


# --- keypoint features ------------------------------------------------------

class InsufficientSamples(GaitDataError):
    """Too few feature samples to fit the projection basis."""


class EmptyInput(GaitDataError):
    """An operation requiring at least one element received none."""


class DegenerateCalibration(GaitDataError):
    """Head and ground rows coincide; height ratio undefined."""


# --- sequence models ---------------------------------------------------------

class BinCountMismatch(GaitDataError):
    """Histograms being compared have different bin counts."""


class EmptyTrainingSet(GaitDataError):
    """No sequences supplied for model training."""


class EmptyWindow(GaitDataError):
    """Scoring window contains no observations."""


class LengthMismatch(GaitDataError):
    """Paired sequences differ in length."""


class TooShort(GaitDataError):
    """Sequence too short to cross-correlate."""


# --- assessment ---------------------------------------------------------------

class WindowTooShort(GaitDataError):
    """Sliding window shorter than the supported minimum."""


class NoTrainingWindows(GaitDataError):
    """Weight fitting received no score pairs."""


class SequenceTooShort(GaitDataError):
    """Sequence shorter than the sliding window."""


class InsufficientData(GaitDataError):
    """Training set too small or otherwise unusable."""


class UnknownVersion(GaitDataError):
    """Serialized model carries an unrecognized format version."""


class SchemaViolation(GaitDataError):
    """Serialized model fails schema or invariant checks."""


# --- evaluation ----------------------------------------------------------------

class SingleClassInput(GaitDataError):
    """Evaluation requires both normal and abnormal samples."""


# --- warning categories ---------------------------------------------------------

class GaitWarning(UserWarning):
    """Base category for recoverable fallbacks."""


class DegenerateCovarianceWarning(GaitWarning):
    """Covariance had fewer informative directions than requested."""


class DegenerateDataWarning(GaitWarning):
    """Training data had no variation; fell back to a trivial model."""


class BothSumsZeroWarning(GaitWarning):
    """Both score sums were zero; fusion weights fell back to 0.5/0.5."""
