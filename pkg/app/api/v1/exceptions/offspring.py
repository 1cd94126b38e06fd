from pydantic import BaseModel

from api.v1.exceptions.base import InvalidInputException


class LawViolation(BaseModel):
    """One violated offspring-law constraint."""

    code: str
    message: str
    index: int | None = None


class InvalidOffspringLawException(InvalidInputException):
    """Exception raised when an offspring law violates its invariants."""

    def __init__(self, detail="Invalid offspring law.", violations: list[LawViolation] | None = None):
        self.violations = violations or []
        if self.violations:
            detail = "; ".join(violation.message for violation in self.violations)
        super().__init__(detail=detail)


class NegativeMassException(InvalidOffspringLawException):
    """Exception raised when a probability mass is negative."""


class MassSumMismatchException(InvalidOffspringLawException):
    """Exception raised when the masses do not sum to one."""


class DegenerateLawException(InvalidOffspringLawException):
    """Exception raised for p_0 = 0, p_0 + p_1 >= 1 or a point-mass law."""


class NotFixedPointException(InvalidInputException):
    """Exception raised when the supplied q is not a fixed point of f."""

    def __init__(self, detail="Supplied point is not a fixed point of the generating function."):
        super().__init__(detail=detail)


VIOLATION_EXCEPTIONS = {
    "NegativeMass": NegativeMassException,
    "MassSumMismatch": MassSumMismatchException,
    "DegenerateLaw": DegenerateLawException,
}


def raise_for_violations(violations: list[LawViolation]) -> None:
    """Raise the exception matching the first violation, carrying the full list."""
    if not violations:
        return
    exception_class = VIOLATION_EXCEPTIONS.get(violations[0].code, InvalidOffspringLawException)
    raise exception_class(violations=violations)
