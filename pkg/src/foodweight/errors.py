"""Exception hierarchy shared by all pipeline modules."""


class FoodWeightError(Exception):
    """Base class for every error raised by this package."""


class DegenerateBox(FoodWeightError):
    """Box has zero or negative extent along some axis."""


class DecodeError(FoodWeightError):
    """Raster bytes are malformed or in an unsupported format."""


class EmptyDataset(FoodWeightError):
    """An operation that needs at least one sample received none."""


class EmptyBatch(FoodWeightError):
    """A loss or gradient computation received an empty batch."""


class EmptyInput(FoodWeightError):
    """A metric received zero-length vectors."""


class ZeroStd(FoodWeightError):
    """Normalization requested with a non-positive standard deviation."""


class UnknownClass(FoodWeightError):
    """Label not present in the class registry."""


class DimensionMismatch(FoodWeightError):
    """Vector or matrix shapes do not agree."""


class NoGroundTruth(FoodWeightError):
    """Detection evaluation requested with no ground-truth boxes at all."""


class NoPredictions(FoodWeightError):
    """Detection evaluation requested with no predictions at all."""


class ZeroActual(FoodWeightError):
    """Percentage error is undefined for an actual value of zero."""


class ConstantActuals(FoodWeightError):
    """R-squared is undefined when all actual values are equal."""


class ParseError(FoodWeightError):
    """Manifest or data file failed validation; message names the location."""


class MissingFile(FoodWeightError):
    """A referenced file does not exist on disk."""
