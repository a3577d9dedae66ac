"""
Error types for the patient similarity toolkit.

Every error raised on purpose by the package derives from
PatientSimilarityError, so callers (the CLI in particular) can tell data
problems from programming errors.
"""

from typing import Optional


class PatientSimilarityError(Exception):
    """Base error carrying a human readable message"""
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class TreeParseError(PatientSimilarityError, ValueError):
    """Malformed bracket notation; offset is the byte offset of the problem"""
    def __init__(self, message: str, offset: int):
        self.reason = message
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ReservedLabelError(PatientSimilarityError, ValueError):
    """A tree uses the reserved dummy label"""


class DimensionError(PatientSimilarityError, ValueError):
    """Vectors of different (or zero) length were compared"""


class ParameterError(PatientSimilarityError, ValueError):
    """A metric or clustering parameter is out of range"""


class IngestError(PatientSimilarityError):
    """A record file could not be loaded; line is 1-based (header is line 1)"""
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownPatientError(PatientSimilarityError, KeyError):
    """A patient id is not present in the dataset or matrix"""

    def __str__(self) -> str:
        return self.message
