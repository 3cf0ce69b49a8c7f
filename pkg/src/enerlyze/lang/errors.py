"""Error types raised by the language frontend."""

from __future__ import annotations

from typing import Optional

from .ast import Span


class SourceError(Exception):
    """Base error carrying a source position."""

    def __init__(self, message: str, span: Optional[Span] = None):
        self.message = message
        self.span = span
        if span is not None:
            message = f"{span.line}:{span.col}: {message}"
        super().__init__(message)


class ParseError(SourceError):
    pass


class CheckError(SourceError):
    pass
