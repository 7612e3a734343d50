"""Exception types shared across the package."""


class AmbulateError(Exception):
    """Base class for all package-specific errors."""


class TraceTooShort(AmbulateError):
    """A recording has too few samples for the requested operation."""


class InvalidSample(AmbulateError):
    """A recording contains NaN or infinite samples."""


class DegenerateOrientation(AmbulateError):
    """Mean acceleration vector is too close to zero to define a rotation."""


class DegenerateChannel(AmbulateError):
    """A channel has (near-)zero variance after detrending."""


class DatasetFormatError(AmbulateError):
    """A dataset file or directory does not match the expected layout."""


class SpecError(AmbulateError):
    """Invalid configuration or arguments."""


class ShapeError(AmbulateError):
    """Tensor shapes do not compose or do not match a declared layout."""


class NumericalError(AmbulateError):
    """A computation produced NaN/Inf or otherwise diverged."""


class CorruptModel(AmbulateError):
    """A stored model fails checksum or consistency checks."""


class SelectionEmpty(AmbulateError):
    """A filtering step selected zero items."""


class IoError(AmbulateError):
    """Reading or writing an artifact failed."""
