"""Exception types for scaresnet.

All errors derive from ``ValueError`` so callers that only know about the
builtin still catch them.
"""

from typing import Optional


class ScaresnetError(ValueError):
    """Base class for every error raised by scaresnet."""


class ShapeError(ScaresnetError):
    """A tensor extent does not fit the operation it was given to."""

    def __init__(self, message: str, axis: Optional[int] = None):
        super().__init__(message)
        self.axis = axis


class ValidationError(ScaresnetError):
    """A value lies outside the domain of an operation or breaks an invariant."""


class GradientError(ScaresnetError):
    """Non-finite values showed up while differentiating or training."""

    def __init__(
        self,
        message: str,
        index: Optional[int] = None,
        step: Optional[int] = None,
    ):
        super().__init__(message)
        self.index = index
        self.step = step


class InputSizeError(ValidationError):
    """An input image is smaller than the network can unify."""

    def __init__(self, message: str, minimum: int):
        super().__init__(message)
        self.minimum = minimum
