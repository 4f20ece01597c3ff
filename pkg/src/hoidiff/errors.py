"""Exception types raised across the package."""


class HoiError(Exception):
    """Base class for all package errors."""


class DegenerateRotation(HoiError, ValueError):
    pass


class DegenerateHeading(HoiError, ValueError):
    pass


class SequenceTooShort(HoiError, ValueError):
    pass


class InvalidT(HoiError, ValueError):
    pass


class WidthMismatch(HoiError, ValueError):
    pass


class ShapeMismatch(HoiError, ValueError):
    pass


class InvalidContextCount(HoiError, ValueError):
    pass


class BufferNotReady(HoiError, RuntimeError):
    pass


class InvalidConfig(HoiError, ValueError):
    pass


class FormatError(HoiError, ValueError):
    pass


class NonFiniteLoss(HoiError, FloatingPointError):
    pass
