"""Exception types raised by the foodfuse toolkit."""


class FoodFuseError(Exception):
    """Base class for all toolkit errors."""


class EmptyMaskError(FoodFuseError):
    """A binary mask contains no foreground pixel."""


class DimMismatchError(FoodFuseError):
    """Two spatial grids that must share dimensions do not."""


class FormatError(FoodFuseError):
    """An image file is not in the expected pixel format."""


class MissingMaskFileError(FoodFuseError):
    """A mask PNG referenced by metadata.csv is absent."""


class CsvSchemaError(FoodFuseError):
    """metadata.csv is missing required columns or has malformed rows."""


class LengthMismatchError(FoodFuseError):
    """RLE counts do not sum to the expected pixel count."""


class SchemaError(FoodFuseError):
    """A JSON or tabular document does not match its expected schema."""


class LabelOutOfRangeError(FoodFuseError):
    """A label map contains a value outside [0, n_classes)."""


class MissingPairError(FoodFuseError):
    """Prediction and ground-truth directories do not contain matching filenames."""


class OutOfBoundsError(FoodFuseError):
    """Prompt geometry lies outside the image bounds."""
