"""Typed errors raised across the toolkit.

Every loader/validator either returns a fully valid object or raises one of
these; callers never see partially constructed data.
"""


class MmkgError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(MmkgError):
    """A record or file does not match its declared schema."""


class ReferenceError(MmkgError):  # noqa: A001 - name is part of the loader contract
    """A record cites an id that does not resolve (e.g. triple -> entity)."""


class DimensionError(MmkgError):
    """A feature vector or matrix has the wrong dimensionality."""


class RatioError(MmkgError):
    """A split ratio is outside (0, 1)."""


class BatchTooSmall(MmkgError):
    """A training batch is too small to draw in-batch negatives."""


class DivergenceError(MmkgError):
    """Training produced a non-finite loss."""


class ShapeError(MmkgError):
    """Parameter / gradient shapes do not line up."""


class StepOutOfRange(MmkgError):
    """A schedule was queried outside [0, total_steps]."""


class LengthError(MmkgError):
    """A token sequence exceeds its configured maximum length."""


class UnknownTokenId(MmkgError):
    """A token id falls outside the vocabulary."""


class EmptyMemory(MmkgError):
    """Decoder memory assembly produced zero rows."""


class EmptyCorpus(MmkgError):
    """A metric was asked to score an empty corpus."""


class CorpusTooSmall(MmkgError):
    """CIDEr-D needs at least two instances to estimate document frequencies."""


class AlignmentError(MmkgError):
    """Hypothesis and reference ids do not line up."""
