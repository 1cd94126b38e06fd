from api.v1.exceptions.base import BranchingException, InvalidInputException


class LawFileIoException(InvalidInputException):
    """Exception raised when a law file cannot be read."""

    def __init__(self, detail="Law file cannot be read."):
        super().__init__(detail=detail, status_code=400)


class LawFileParseException(InvalidInputException):
    """Exception raised when a law file is not well-formed."""

    def __init__(self, detail="Law file is not well-formed."):
        super().__init__(detail=detail, status_code=400)


class UsageException(BranchingException):
    """Exception raised for command line usage errors."""

    exit_code = 3

    def __init__(self, detail="Invalid usage."):
        super().__init__(detail=detail, status_code=400)
