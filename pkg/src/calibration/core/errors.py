from enum import Enum
from typing import Optional


class ErrorCode(str, Enum):
    # input / format (exit 2)
    MALFORMED_HEADER = "malformed header"
    ROW_LENGTH_MISMATCH = "row length mismatch"
    BAD_MAGIC = "bad magic"
    TRUNCATED_PAYLOAD = "truncated payload"
    UNSUPPORTED_VERSION = "unsupported version"
    BAD_VALUE = "bad value"
    UNKNOWN_FORMAT = "unknown format"
    FILE_NOT_FOUND = "file not found"
    INVALID_PARAMETER = "invalid parameter"
    # validation / shape (exit 3)
    ROW_SUM = "row sum"
    PROBABILITY_RANGE = "probability range"
    NON_FINITE = "non-finite value"
    LABEL_RANGE = "label out of range"
    SHAPE = "shape"
    SHAPE_MISMATCH = "shape mismatch"


class CalibrationError(ValueError):
    """Base error; carries a stable code and the CLI exit code it maps to"""

    exit_code = 2

    def __init__(self, code: ErrorCode, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.row = row

    def to_dict(self) -> dict:
        return {"error": self.code.value, "message": self.message, "row": self.row}


class FormatError(CalibrationError):
    exit_code = 2


class InvalidParameterError(CalibrationError):
    exit_code = 2

    def __init__(self, message: str):
        super().__init__(ErrorCode.INVALID_PARAMETER, message)


class InvalidPredictionsError(CalibrationError):
    exit_code = 3


class ShapeMismatchError(CalibrationError):
    exit_code = 3

    def __init__(self, message: str):
        super().__init__(ErrorCode.SHAPE_MISMATCH, message)
