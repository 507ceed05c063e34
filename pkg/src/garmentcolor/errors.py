"""Exception hierarchy.

Every error carries a short ``category`` string (the class name) so the CLI can
print a single machine-parsable line.
"""

from __future__ import annotations


class GarmentColorError(Exception):
    @property
    def category(self) -> str:
        return type(self).__name__


class EmptyMask(GarmentColorError):
    pass


class EmptyInput(GarmentColorError):
    pass


class EmptyData(GarmentColorError):
    pass


class EmptyCandidateSet(GarmentColorError):
    pass


class UnknownLabel(GarmentColorError):
    pass


class SchemaMismatch(GarmentColorError):
    pass


class SingularSystem(GarmentColorError):
    pass


class LengthMismatch(GarmentColorError):
    pass


class RangeError(GarmentColorError):
    pass


class KTooLarge(GarmentColorError):
    pass


class DegenerateTable(GarmentColorError):
    pass


class ParseError(GarmentColorError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InvariantViolation(GarmentColorError):
    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message if record_id is None else f"record {record_id}: {message}")
        self.record_id = record_id
