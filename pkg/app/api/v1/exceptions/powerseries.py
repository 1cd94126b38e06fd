from api.v1.exceptions.base import InvalidInputException


class InnerConstantOutOfRangeException(InvalidInputException):
    """Exception raised when the inner series of a composition has constant term outside [0, 1)."""

    def __init__(self, detail="Inner series constant term must lie in [0, 1)."):
        super().__init__(detail=detail)


class ZeroOrderSeriesException(InvalidInputException):
    """Exception raised when differentiating a series of order zero."""

    def __init__(self, detail="Cannot differentiate a series of order zero."):
        super().__init__(detail=detail)
