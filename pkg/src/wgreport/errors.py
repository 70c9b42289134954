"""Exception hierarchy shared by all pipeline stages.

Every error carries the CLI exit code it maps to: 2 for input and
configuration problems, 3 for backend and network failures.
"""

from __future__ import annotations


class WgReportError(Exception):
    exit_code = 2


# ingest
class NetworkError(WgReportError):
    exit_code = 3


class ParseError(WgReportError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class NotFound(WgReportError):
    pass


# resolve
class InvalidThreshold(WgReportError, ValueError):
    pass


# corpus
class ConsistencyError(WgReportError):
    pass


class IoError(WgReportError, OSError):
    pass


class SchemaError(WgReportError):
    pass


# index
class InvalidBudget(WgReportError, ValueError):
    pass


# llm
class BackendError(WgReportError):
    exit_code = 3

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class RateLimitExhausted(BackendError):
    def __init__(self, message: str, attempts: int, status: int | None = None):
        self.attempts = attempts
        super().__init__(message, status)


class ContextOverflow(WgReportError):
    pass


class GroundingError(WgReportError):
    exit_code = 3

    def __init__(self, message: str, unknown: list[str] | None = None):
        self.unknown = list(unknown or [])
        super().__init__(message)


class FormatError(WgReportError):
    exit_code = 3


# report
class DuplicateWg(WgReportError):
    pass
