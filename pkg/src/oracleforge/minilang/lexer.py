"""Tokenizer for MJ source text.

Offsets are byte offsets into the UTF-8 encoding of the source.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

KEYWORDS = frozenset({"int", "num", "bool", "if", "else", "while", "return"})
TYPE_KEYWORDS = ("int", "num", "bool")
BOOL_LITERALS = frozenset({"true", "false"})

INT_MAX = 2**63 - 1

# Longest operators first.
OPERATORS = ("<=", ">=", "==", "!=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "=")
PUNCT = ("(", ")", "{", "}", ";", ",")

_TOKEN_RE = re.compile(
    rb"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|&&|\|\||[-+*/%<>!=])
  | (?P<punct>[(){};,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    lexeme: str
    kind: str  # ident | keyword | int-lit | num-lit | bool-lit | operator | punct
    start: int
    end: int


def tokenize(source: str) -> list[Token]:
    data = source.encode("utf-8")
    tokens: list[Token] = []
    pos = 0
    while pos < len(data):
        m = _TOKEN_RE.match(data, pos)
        if m is None:
            raise ParseError(pos, f"unexpected character {data[pos:pos + 1]!r}")
        group = m.lastgroup
        text = m.group().decode("utf-8")
        if group == "ws":
            pass
        elif group == "num":
            if float(text) == float("inf"):
                raise ParseError(pos, f"numeric literal out of range: {text}")
            tokens.append(Token(text, "num-lit", m.start(), m.end()))
        elif group == "int":
            tokens.append(Token(text, "int-lit", m.start(), m.end()))
        elif group == "word":
            if text in KEYWORDS:
                kind = "keyword"
            elif text in BOOL_LITERALS:
                kind = "bool-lit"
            else:
                kind = "ident"
            tokens.append(Token(text, kind, m.start(), m.end()))
        elif group == "op":
            tokens.append(Token(text, "operator", m.start(), m.end()))
        else:
            tokens.append(Token(text, "punct", m.start(), m.end()))
        pos = m.end()
    return tokens


def format_num(value: float) -> str:
    """Shortest round-trip decimal that still lexes as a num literal."""
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"{text} has no MJ literal form")
    if "." not in text and "e" not in text:
        text += ".0"
    return text
