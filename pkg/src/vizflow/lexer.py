"""Tokenizer shared by the expression language and the program DSL."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError
from .table import parse_number

# longest-match first
OPERATORS = [
    "&&", "||", "<=", ">=", "==", "!=",
    "?", ":", "!", "<", ">", "+", "-", "*", "/", "%",
    "(", ")", "{", "}", "[", "]", ",", ";", "=",
]

NUM, STR, IDENT, ATTR, OP, EOF = "num", "str", "ident", "attr", "op", "eof"

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.col})"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def err(msg):
        raise ParseError(msg, line, col)

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
        start_line, start_col = line, col
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    if j + 1 >= n:
                        err("unterminated string escape")
                    esc = text[j + 1]
                    if esc not in _ESCAPES:
                        err(f"unknown escape \\{esc}")
                    out.append(_ESCAPES[esc])
                    j += 2
                elif text[j] == "\n":
                    err("newline inside string literal")
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                err("unterminated string literal")
            tokens.append(Token(STR, "".join(out), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c == "$":
            j = i + 1
            if j < n and text[j] == '"':
                # quoted attribute name: $"City Name"
                k = j + 1
                out = []
                while k < n and text[k] != '"':
                    out.append(text[k])
                    k += 1
                if k >= n:
                    err("unterminated attribute name")
                tokens.append(Token(ATTR, "".join(out), start_line, start_col))
                col += k + 1 - i
                i = k + 1
                continue
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                err("'$' must be followed by an attribute name")
            tokens.append(Token(ATTR, text[i + 1 : j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE" and j + 1 < n and (text[j + 1].isdigit() or text[j + 1] in "+-"):
                j += 1
                if text[j] in "+-":
                    j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "kM":
                j += 1
            v = parse_number(text[i:j])
            if v is None:
                err(f"bad numeric literal {text[i:j]!r}")
            tokens.append(Token(NUM, v, start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token(IDENT, text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        for op in OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token(OP, op, start_line, start_col))
                col += len(op)
                i += len(op)
                break
        else:
            err(f"unexpected character {c!r}")
    tokens.append(Token(EOF, None, line, col))
    return tokens


class TokenStream:
    """Cursor over a token list, with peek/expect conveniences."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != EOF:
            self.pos += 1
        return t

    def at_op(self, *ops: str) -> bool:
        t = self.cur
        return t.kind == OP and t.value in ops

    def eat_op(self, op: str) -> bool:
        if self.at_op(op):
            self.advance()
            return True
        return False

    def expect_op(self, op: str) -> Token:
        t = self.cur
        if not self.at_op(op):
            raise ParseError(f"expected {op!r}, got {describe(t)}", t.line, t.col)
        return self.advance()

    def expect(self, kind: str) -> Token:
        t = self.cur
        if t.kind != kind:
            raise ParseError(f"expected {kind}, got {describe(t)}", t.line, t.col)
        return self.advance()


def describe(t: Token) -> str:
    if t.kind == EOF:
        return "end of input"
    return repr(t.value)
