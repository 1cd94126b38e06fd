from fastapi import HTTPException


class BranchingException(HTTPException):
    """Base for every toolkit error. Carries the CLI exit code next to the HTTP status."""

    exit_code: int = 1

    def __init__(self, detail: str, status_code: int = 422):
        super().__init__(status_code=status_code, detail=detail)

    def __str__(self) -> str:
        return str(self.detail)


class InvalidInputException(BranchingException):
    """Invalid law or input."""

    exit_code = 1


class NumericalException(BranchingException):
    """Numerical non-convergence or a law outside the supported regime."""

    exit_code = 2
