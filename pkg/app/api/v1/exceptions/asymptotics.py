from api.v1.exceptions.base import NumericalException


class CriticalLawException(NumericalException):
    """Exception raised for critical laws (mean offspring within the cutoff of 1)."""

    def __init__(self, detail="Critical law: |m - 1| is within the criticality cutoff."):
        super().__init__(detail=detail)


class NotConvergedException(NumericalException):
    """Exception raised when an extrapolated limit does not settle within n_max steps."""

    def __init__(self, detail="Limit extrapolation did not converge."):
        super().__init__(detail=detail)
