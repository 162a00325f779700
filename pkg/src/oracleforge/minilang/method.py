from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import ast
from .errors import ParseError
from .lexer import Token
from .parser import parse_methods
from .typecheck import Signature, signature_of, typecheck


@dataclass(frozen=True)
class SourceMethod:
    """A parsed, typechecked MJ method together with its token/statement map."""

    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    source: str
    ast: ast.MethodDecl
    token_stream: tuple[Token, ...]
    stmt_spans: tuple[int, ...]  # token index -> statement id
    # other methods this one may call; used again when re-checking mutants
    signatures: Mapping[str, Signature] = field(default_factory=dict, compare=False, repr=False)

    @property
    def signature(self) -> Signature:
        return signature_of(self.ast)

    @property
    def n_statements(self) -> int:
        return sum(1 for _ in ast.walk_statements(self.ast.body))


def parse_method(source: str, signatures: Mapping[str, Signature] | None = None) -> SourceMethod:
    """Parse and typecheck a single method.

    Raises ParseError (with byte offset) or MjTypeError (with statement id).
    """
    tokens, methods, token_sid = parse_methods(source)
    if len(methods) != 1:
        second = tokens[methods[1].token_start]
        raise ParseError(second.start, "expected exactly one method")
    decl = methods[0].decl
    sigs = dict(signatures or {})
    sigs.pop(decl.name, None)
    typecheck(decl, sigs)
    return SourceMethod(
        name=decl.name,
        params=decl.params,
        return_type=decl.return_type,
        source=source,
        ast=decl,
        token_stream=tuple(tokens),
        stmt_spans=tuple(token_sid),
        signatures=sigs,
    )


def tokenize_with_statements(method: SourceMethod) -> tuple[list[Token], list[int]]:
    return list(method.token_stream), list(method.stmt_spans)


def is_compilable(source: str, signatures: Mapping[str, Signature] | None = None) -> bool:
    from .errors import MjError

    try:
        parse_method(source, signatures)
    except MjError:
        return False
    return True
