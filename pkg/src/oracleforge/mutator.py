"""Mutation operators over MJ methods and the higher-order mutant generator.

Rewrites are token splices on the original source text, so everything outside
the mutated site is preserved byte for byte. A site is addressed by
(statement id, pre-order index of the node among the statement's expression
nodes).
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional

from .minilang import MjError, SourceMethod, parse_method
from .minilang import ast


class NotApplicable(ValueError):
    pass


class NoMutant(RuntimeError):
    pass


class MutationOperator(str, enum.Enum):
    AOR = "AOR"  # + <-> -, * <-> /
    ROR = "ROR"  # < <-> <=, > <-> >=, == <-> !=
    LOR = "LOR"  # && <-> ||
    NegCond = "NegCond"  # if/while condition c -> !(c)
    ConstRep = "ConstRep"  # int c -> c+1, num c -> -c, bool b -> !b
    ConstZero = "ConstZero"  # int c -> 0 for c != 0
    ParenShift = "ParenShift"  # move a closing paren to the end of the enclosing operand chain


OPERATOR_ORDER = tuple(MutationOperator)

_SWAPS = {
    MutationOperator.AOR: {"+": "-", "-": "+", "*": "/", "/": "*"},
    MutationOperator.ROR: {"<": "<=", "<=": "<", ">": ">=", ">=": ">", "==": "!=", "!=": "=="},
    MutationOperator.LOR: {"&&": "||", "||": "&&"},
}


@dataclass(frozen=True)
class Mutable:
    op: MutationOperator
    stmt: int
    node: int

    def to_json(self) -> dict:
        return {"op": self.op.value, "stmt": self.stmt, "node": self.node}

    @classmethod
    def from_json(cls, d: dict) -> "Mutable":
        return cls(MutationOperator(d["op"]), int(d["stmt"]), int(d["node"]))


@dataclass(frozen=True)
class Mutant:
    source: str
    applied: tuple[Mutable, ...]
    order: int
    parent: str

    def to_json(self) -> dict:
        return {
            "parent": self.parent,
            "source": self.source,
            "applied": [m.to_json() for m in self.applied],
            "order": self.order,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Mutant":
        applied = tuple(Mutable.from_json(a) for a in d["applied"])
        return cls(d["source"], applied, int(d["order"]), d["parent"])


def _statements(method: SourceMethod) -> dict[int, ast.Stmt]:
    return {s.sid: s for s in ast.walk_statements(method.ast.body)}


def locate(method: SourceMethod, stmt: int, node: int) -> tuple[ast.Stmt, ast.Expr] | None:
    s = _statements(method).get(stmt)
    if s is None:
        return None
    nodes = ast.statement_nodes(s)
    if not 0 <= node < len(nodes):
        return None
    return s, nodes[node]


def paren_shift_leaf(node: ast.Expr) -> Optional[ast.Expr]:
    """Leftmost operand of a binary chain if it ends in a closing paren."""
    if not isinstance(node, ast.Binary):
        return None
    leaf = node.left
    while isinstance(leaf, ast.Binary):
        leaf = leaf.left
    if isinstance(leaf, ast.Paren) or (isinstance(leaf, ast.Call) and leaf.args):
        return leaf
    return None


def applicable(op: MutationOperator, stmt: ast.Stmt, node: ast.Expr, node_index: int) -> bool:
    if op in _SWAPS:
        return isinstance(node, ast.Binary) and node.op in _SWAPS[op]
    if op is MutationOperator.NegCond:
        return node_index == 0 and isinstance(stmt, (ast.If, ast.While))
    if op is MutationOperator.ConstRep:
        return isinstance(node, (ast.IntLit, ast.NumLit, ast.BoolLit))
    if op is MutationOperator.ConstZero:
        return isinstance(node, ast.IntLit) and node.value != 0
    return paren_shift_leaf(node) is not None


def _edits(method: SourceMethod, op: MutationOperator, node: ast.Expr) -> list[tuple[int, int, str]]:
    toks = method.token_stream
    if op in _SWAPS:
        tok = toks[node.left.span[1] + 1]
        return [(tok.start, tok.end, _SWAPS[op][tok.lexeme])]
    if op is MutationOperator.NegCond:
        first, last = toks[node.span[0]], toks[node.span[1]]
        return [(first.start, first.start, "!("), (last.end, last.end, ")")]
    if op is MutationOperator.ConstRep:
        tok = toks[node.span[0]]
        if isinstance(node, ast.BoolLit):
            text = "false" if node.value else "true"
        elif isinstance(node, ast.IntLit):
            text = str(node.value + 1)
        else:
            text = "-" + tok.lexeme
        return [(tok.start, tok.end, text)]
    if op is MutationOperator.ConstZero:
        tok = toks[node.span[0]]
        return [(tok.start, tok.end, "0")]
    leaf = paren_shift_leaf(node)
    close, end = toks[leaf.span[1]], toks[node.span[1]]
    return [(close.start, close.end, ""), (end.end, end.end, ")")]


def _splice(source: str, edits: list[tuple[int, int, str]]) -> str:
    data = source.encode("utf-8")
    for start, end, text in sorted(edits, key=lambda e: (e[0], e[1]), reverse=True):
        data = data[:start] + text.encode("utf-8") + data[end:]
    return data.decode("utf-8")


def apply_mutable(method: SourceMethod, m: Mutable) -> str:
    """Source text of ``method`` with the single rewrite ``m`` applied."""
    found = locate(method, m.stmt, m.node)
    if found is None or not applicable(m.op, found[0], found[1], m.node):
        raise NotApplicable(f"{m.op.value} does not apply at statement {m.stmt}, node {m.node}")
    return _splice(method.source, _edits(method, m.op, found[1]))


def _compiles(source: str, method: SourceMethod) -> Optional[SourceMethod]:
    try:
        return parse_method(source, method.signatures)
    except MjError:
        return None


def enumerate_mutables(method: SourceMethod) -> list[Mutable]:
    """All (op, loc) pairs that individually yield a compilable, distinct mutant.

    Ordered by statement id, then node index, then operator declaration order.
    """
    out = []
    for stmt in ast.walk_statements(method.ast.body):
        for idx, node in enumerate(ast.statement_nodes(stmt)):
            for op in OPERATOR_ORDER:
                if not applicable(op, stmt, node, idx):
                    continue
                text = _splice(method.source, _edits(method, op, node))
                if text != method.source and _compiles(text, method) is not None:
                    out.append(Mutable(op, stmt.sid, idx))
    return out


def _fingerprint(node: ast.Expr) -> tuple:
    key = getattr(node, "op", None)
    if key is None:
        key = getattr(node, "value", getattr(node, "name", None))
    return type(node).__name__, key


def generate_hom(method: SourceMethod, order: int, rng: random.Random | None = None,
                 shuffle: bool = False) -> Mutant:
    """Apply up to ``order`` mutations cumulatively.

    Mutables come from the original method. Before each application the site is
    re-validated against the current mutant and skipped if it changed. The
    first application that fails to compile is reverted and the accumulated
    mutant is returned.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    mutables = enumerate_mutables(method)
    if shuffle:
        (rng or random.Random(0)).shuffle(mutables)
    current = method
    applied: list[Mutable] = []
    for m in mutables:
        if len(applied) == order:
            break
        original = locate(method, m.stmt, m.node)
        now = locate(current, m.stmt, m.node)
        if now is None or _fingerprint(now[1]) != _fingerprint(original[1]) \
                or not applicable(m.op, now[0], now[1], m.node):
            continue
        nxt = _compiles(apply_mutable(current, m), method)
        if nxt is None:
            break
        current = nxt
        applied.append(m)
    if not applied or current.source == method.source:
        raise NoMutant(f"no mutation could be applied to {method.name}")
    return Mutant(current.source, tuple(applied), len(applied), method.name)


def buggy_statements(parent: SourceMethod, mutant: Mutant) -> set[int]:
    """Statement ids (in the parent's numbering) touched by the mutant."""
    return {m.stmt for m in mutant.applied}


__all__ = [
    "Mutable", "Mutant", "MutationOperator", "NoMutant", "NotApplicable",
    "OPERATOR_ORDER", "applicable", "apply_mutable", "buggy_statements", "enumerate_mutables",
    "generate_hom", "locate",
]
