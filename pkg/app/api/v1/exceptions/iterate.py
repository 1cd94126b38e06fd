from api.v1.exceptions.base import NumericalException


class TruncationLossExceededException(NumericalException):
    """Exception raised when a transition row loses too much mass beyond the column cap."""

    def __init__(self, detail="Truncation loss exceeds the allowed limit."):
        super().__init__(detail=detail)
