"""Exception types shared across the package."""


class MmfitError(Exception):
    """Base class for all package errors."""


class TooFewPoints(MmfitError):
    """Fewer data points than the minimal sample of the model."""


class DegenerateSample(MmfitError):
    """The sampled points do not determine the model (rank deficiency)."""


class NonInvertible(MmfitError):
    """A matrix that must be invertible is singular within tolerance."""


class InvalidDepth(MmfitError):
    """Inverse depth is non-positive or non-finite at the queried pixel."""


class NoModelsProposed(MmfitError):
    """Every proposal draw degenerated; no model hypotheses available."""


class InsufficientLocalPoints(MmfitError):
    """Not enough points inside the local sampling radius."""


class DegenerateRays(MmfitError):
    """Triangulation rays are parallel within tolerance."""


class ParseError(MmfitError):
    """A data file row failed to parse.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingHeader(MmfitError):
    """A required file header line is absent."""


class DimensionMismatch(MmfitError):
    """Grids or arrays that must agree in shape do not."""


class AllDepthInvalid(MmfitError):
    """A depth image contains no valid (positive, finite) pixel."""


class NoLabels(MmfitError):
    """Ground-truth construction requires instance labels, none given."""
