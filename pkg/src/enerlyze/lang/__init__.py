"""Mini-language frontend: parser, static checker, pretty-printer."""

from . import ast, library
from .ast import Program, Span, to_json
from .checker import CheckedProgram, check
from .errors import CheckError, ParseError, SourceError
from .parser import parse_source
from .printer import pretty_print

__all__ = [
    "ast", "library", "Program", "Span", "to_json",
    "CheckedProgram", "check", "CheckError", "ParseError", "SourceError",
    "parse_source", "pretty_print",
]
