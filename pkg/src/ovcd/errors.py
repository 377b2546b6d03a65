"""Exception hierarchy shared across the engine."""


class OvcdError(Exception):
    """Base class for all engine errors."""


class FormatError(OvcdError):
    """A file does not conform to one of the documented formats."""


class ShapeError(OvcdError):
    """Spatial dimensions or vector dimensions do not match."""


class EmptyRegionError(OvcdError):
    """A mask with zero foreground area was used where area > 0 is required."""


class MissingClassError(OvcdError):
    """A category expected to have support samples has none."""


class LabelError(OvcdError):
    """A raster contains a label outside the vocabulary."""


class ConfigError(OvcdError):
    """Invalid or incomplete configuration."""


class DataError(OvcdError):
    """A referenced data file is missing or unreadable."""
