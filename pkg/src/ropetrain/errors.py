"""Exception types shared across the package."""


class RopetrainError(Exception):
    """Base class for all package errors."""


# --- bundle loading ---------------------------------------------------------

class MissingFile(RopetrainError):
    pass


class SchemaViolation(RopetrainError):
    """Names the first offending field of a malformed bundle."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DanglingReference(RopetrainError):
    pass


class RootUnreadable(RopetrainError):
    pass


# --- grading ----------------------------------------------------------------

class JudgeUnavailable(RopetrainError):
    pass


class OutOfRange(RopetrainError):
    pass


class SheetMismatch(RopetrainError):
    pass


class UnresolvedItems(RopetrainError):
    pass


class EmptyCompletion(RopetrainError):
    pass


# --- feedback ---------------------------------------------------------------

class NotApplicable(RopetrainError):
    pass


class IllegalCombination(RopetrainError):
    pass


# --- sessions ---------------------------------------------------------------

class UnknownTask(RopetrainError):
    pass


class UnknownSession(RopetrainError):
    pass


class SessionEnded(RopetrainError):
    pass


class CorruptLog(RopetrainError):
    """Carries the first bad line number of a session log."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class UnknownTurn(RopetrainError):
    pass


# --- gateway ----------------------------------------------------------------

class BackendError(RopetrainError):
    pass


class CassetteMiss(BackendError):
    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")


class PathUnwritable(RopetrainError):
    pass


# --- statistics / lab -------------------------------------------------------

class LengthMismatch(RopetrainError):
    pass


class DegenerateInput(RopetrainError):
    pass


class UnsupportedFormat(RopetrainError):
    pass
