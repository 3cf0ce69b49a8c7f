"""Tokenizer for ``.esrc`` sources."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import Span
from .errors import ParseError

KEYWORDS = {
    "void", "int", "float", "bool", "char", "Object",
    "if", "else", "for", "while", "switch", "case", "default",
    "return", "break", "new", "null", "true", "false",
}

# Longest-match first.
SYMBOLS = [
    "<<", ">>", "<=", ">=", "==", "&&", "||", "++", "--",
    "(", ")", "{", "}", "[", "]", ";", ",", ".", ":",
    "+", "-", "*", "/", "<", ">", "=", "!", "&", "|",
]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "keyword" | "int" | "float" | symbol text | "eof"
    text: str
    span: Span


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def span() -> Span:
        return Span(line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, span()))
            col += i - start
            continue
        if c.isdigit():
            start = i
            isfloat = False
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == "." and i + 1 < n and text[i + 1].isdigit():
                isfloat = True
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    isfloat = True
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            word = text[start:i]
            tokens.append(Token("float" if isfloat else "int", word, span()))
            col += i - start
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, span()))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", span())
    tokens.append(Token("eof", "", Span(line, col)))
    return tokens
