"""Error types and diagnostics shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


class VizError(Exception):
    """Base class for all vizflow errors."""


class IngestError(VizError):
    """Raised for malformed or empty input data (CSV)."""


class ParseError(VizError):
    """Syntax error in an expression or program, with source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, col {col})" if line else message)
        self.message = message
        self.line = line
        self.col = col


class EvalError(VizError):
    """Runtime expression failure: unresolved name, attr without row, bad index."""


class EngineError(VizError):
    """Render-aborting engine failure (e.g. runaway recursion, bad Order result)."""


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal problem found during validation or rendering."""

    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message
