from api.v1.exceptions.base import NumericalException


class StateCapExceededException(NumericalException):
    """Exception raised when a Q-process trajectory leaves the state cap."""

    def __init__(self, detail="Q-process state exceeded the state cap."):
        super().__init__(detail=detail)
