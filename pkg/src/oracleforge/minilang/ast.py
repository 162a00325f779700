"""MJ syntax tree.

Nodes keep their token range in ``span`` (first, last token index, inclusive)
and statements their pre-order ``sid``; both are excluded from equality so
trees compare structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

INT, NUM, BOOL = "int", "num", "bool"


def _span():
    return field(default=(-1, -1), compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class NumLit:
    value: float
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Var:
    name: str
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Paren:
    inner: "Expr"
    span: tuple[int, int] = _span()


@dataclass(frozen=True)
class Cast:
    type: str
    operand: "Expr"
    span: tuple[int, int] = _span()


Expr = Union[IntLit, NumLit, BoolLit, Var, Unary, Binary, Call, Paren, Cast]


def _sid():
    return field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class VarDecl:
    type: str
    name: str
    init: Expr
    sid: int = _sid()


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr
    sid: int = _sid()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] | None
    sid: int = _sid()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Stmt", ...]
    sid: int = _sid()


@dataclass(frozen=True)
class Return:
    value: Expr
    sid: int = _sid()


Stmt = Union[VarDecl, Assign, If, While, Return]


@dataclass(frozen=True)
class MethodDecl:
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    body: tuple[Stmt, ...]


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, Paren):
        return (node.inner,)
    if isinstance(node, Cast):
        return (node.operand,)
    return ()


def preorder(node: Expr) -> Iterator[Expr]:
    yield node
    for child in children(node):
        yield from preorder(child)


def statement_expr(stmt: Stmt) -> Expr:
    """The single expression a statement owns directly."""
    if isinstance(stmt, VarDecl):
        return stmt.init
    if isinstance(stmt, Assign):
        return stmt.value
    if isinstance(stmt, (If, While)):
        return stmt.cond
    return stmt.value


def walk_statements(body) -> Iterator[Stmt]:
    """Statements in pre-order, which is also sid order."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, If):
            yield from walk_statements(stmt.then)
            if stmt.orelse is not None:
                yield from walk_statements(stmt.orelse)
        elif isinstance(stmt, While):
            yield from walk_statements(stmt.body)


def statement_nodes(stmt: Stmt) -> list[Expr]:
    """Expression nodes of one statement in pre-order (the node-index space)."""
    return list(preorder(statement_expr(stmt)))
