"""Exception hierarchy.

Every error carries a machine-readable ``code`` and maps onto one CLI exit
status through its class: config/parse problems exit 2, stream problems exit
3, capacity limits exit 4.
"""

from __future__ import annotations

from typing import Any


class ProbCERError(Exception):
    exit_code = 2

    def __init__(self, code: str, message: str = "", **details: Any) -> None:
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message
        self.details = details

    def to_json(self) -> dict:
        out = {"error": self.code, "message": self.message}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


class EventValidationError(ProbCERError):
    """Raised for malformed events (PROB_SUM_EXCEEDED, NEGATIVE_PROB, ...)."""


class ParseError(ProbCERError):
    """Syntax or static-validation error in rule source, with a position."""

    def __init__(self, code: str, message: str = "", line: int | None = None,
                 col: int | None = None, **details: Any) -> None:
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(code, message + where, line=line, col=col, **details)
        self.line = line
        self.col = col


class CompileError(ProbCERError):
    """Rule is valid but cannot be compiled to an automaton plan."""


class QueryError(ProbCERError):
    """Bad query against a result (NO_SUCH_CE, EMPTY_MATCH_SET, ...)."""


class ModelError(ProbCERError):
    """Probability model misuse (MODEL_NOT_MONOTONE, INCOMPLETE_HISTORY)."""


class StreamError(ProbCERError):
    exit_code = 3


class CapacityError(ProbCERError):
    exit_code = 4
