"""Tokenizer for OQL query text.

Token alphabet: keywords, identifiers, signed numeric literals, comparison
operators (= != < > <= >= ~), dot, comma. `--` starts a line comment.
Keywords are recognized case-insensitively. Anything else is a LexError
pointing at the offending character.
"""

import re
from dataclasses import dataclass
from enum import Enum

from ..errors import LexError

KEYWORDS = frozenset({
    "SELECT", "FROM", "WHERE", "AND", "HAVING",
    "ORDER", "BY", "LIMIT", "ASC", "DESC", "BETWEEN",
})


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    NUMBER = "number"
    OP = "operator"
    DOT = "dot"
    COMMA = "comma"
    END = "end"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int    # 1-based
    column: int  # 1-based

    def upper(self) -> str:
        return self.text.upper()


_WS_RE = re.compile(r"[ \t\r\n]+")
_COMMENT_RE = re.compile(r"--[^\n]*")
# sign binds to the literal; a lone sign is not a token
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.\d*|\d+|\.\d+)")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = ("<=", ">=", "!=", "=", "<", ">", "~")


def tokenize(source: str) -> list[Token]:
    """Scan source text to a token list ending with an END token."""
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _WS_RE.match(source, pos)
        if m:
            chunk = m.group()
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = pos + chunk.rfind("\n") + 1
            pos = m.end()
            continue
        m = _COMMENT_RE.match(source, pos)
        if m:
            pos = m.end()
            continue
        col = pos - line_start + 1
        m = _NUMBER_RE.match(source, pos)
        if m:
            tokens.append(Token(TokenKind.NUMBER, m.group(), line, col))
            pos = m.end()
            continue
        m = _IDENT_RE.match(source, pos)
        if m:
            text = m.group()
            kind = TokenKind.KEYWORD if text.upper() in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, text, line, col))
            pos = m.end()
            continue
        two = source[pos:pos + 2]
        if two in _OPERATORS:
            tokens.append(Token(TokenKind.OP, two, line, col))
            pos += 2
            continue
        one = source[pos]
        if one in _OPERATORS:
            tokens.append(Token(TokenKind.OP, one, line, col))
            pos += 1
            continue
        if one == ".":
            tokens.append(Token(TokenKind.DOT, one, line, col))
            pos += 1
            continue
        if one == ",":
            tokens.append(Token(TokenKind.COMMA, one, line, col))
            pos += 1
            continue
        raise LexError(f"unexpected character {one!r}", line, col)
    tokens.append(Token(TokenKind.END, "", line, n - line_start + 1))
    return tokens
