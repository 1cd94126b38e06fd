from api.v1.exceptions.base import NumericalException


class PopulationCapExceededException(NumericalException):
    """Exception raised when too many replicates outgrow the population cap."""

    def __init__(self, detail="Too many replicates exceeded the population cap."):
        super().__init__(detail=detail)


class InsufficientSurvivorsException(NumericalException):
    """Exception raised when a horizon leaves too few expected survivors."""

    def __init__(self, detail="Expected number of survivors is below the required minimum."):
        super().__init__(detail=detail)
