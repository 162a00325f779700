"""Static typing for MJ: exact Int/Num/Bool, no implicit coercion."""
from __future__ import annotations

from typing import Mapping

from . import ast
from .ast import BOOL, INT, NUM
from .errors import MjTypeError

# name -> (parameter types, return type)
Signature = tuple[tuple[str, ...], str]

ARITH = frozenset({"+", "-", "*", "/", "%"})
ORDER = frozenset({"<", "<=", ">", ">="})
EQUALITY = frozenset({"==", "!="})
LOGIC = frozenset({"&&", "||"})

BUILTINS = frozenset({"abs"})


def signature_of(decl: ast.MethodDecl) -> Signature:
    return tuple(t for _, t in decl.params), decl.return_type


class _Checker:
    def __init__(self, decl: ast.MethodDecl, signatures: Mapping[str, Signature]):
        self.decl = decl
        self.signatures = dict(signatures)
        self.signatures[decl.name] = signature_of(decl)
        self.scopes: list[dict[str, str]] = []

    def lookup(self, name: str, sid: int) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise MjTypeError(sid, f"undeclared variable {name!r}")

    def declare(self, name: str, vtype: str, sid: int | None) -> None:
        if any(name in scope for scope in self.scopes):
            raise MjTypeError(sid, f"variable {name!r} already declared")
        self.scopes[-1][name] = vtype

    def check(self) -> None:
        if self.decl.name in BUILTINS:
            raise MjTypeError(None, f"{self.decl.name!r} is a builtin")
        self.scopes.append({})
        for pname, ptype in self.decl.params:
            self.declare(pname, ptype, None)
        returns = self.block(self.decl.body)
        if not returns:
            last = max((s.sid for s in ast.walk_statements(self.decl.body)), default=None)
            raise MjTypeError(last, "missing return statement on some path")

    def block(self, stmts) -> bool:
        """Check a statement list; True if it returns on every path."""
        self.scopes.append({})
        returns = False
        for stmt in stmts:
            returns = self.statement(stmt) or returns
        self.scopes.pop()
        return returns

    def statement(self, stmt: ast.Stmt) -> bool:
        sid = stmt.sid
        if isinstance(stmt, ast.VarDecl):
            self.expect(stmt.init, stmt.type, sid)
            self.declare(stmt.name, stmt.type, sid)
            return False
        if isinstance(stmt, ast.Assign):
            self.expect(stmt.value, self.lookup(stmt.name, sid), sid)
            return False
        if isinstance(stmt, ast.If):
            self.expect(stmt.cond, BOOL, sid)
            then_returns = self.block(stmt.then)
            if stmt.orelse is None:
                return False
            return self.block(stmt.orelse) and then_returns
        if isinstance(stmt, ast.While):
            self.expect(stmt.cond, BOOL, sid)
            self.block(stmt.body)
            return False
        self.expect(stmt.value, self.decl.return_type, sid)
        return True

    def expect(self, expr: ast.Expr, wanted: str, sid: int) -> None:
        got = self.expr(expr, sid)
        if got != wanted:
            raise MjTypeError(sid, f"expected {wanted}, found {got}")

    def expr(self, e: ast.Expr, sid: int) -> str:
        if isinstance(e, ast.IntLit):
            return INT
        if isinstance(e, ast.NumLit):
            return NUM
        if isinstance(e, ast.BoolLit):
            return BOOL
        if isinstance(e, ast.Var):
            return self.lookup(e.name, sid)
        if isinstance(e, ast.Paren):
            return self.expr(e.inner, sid)
        if isinstance(e, ast.Cast):
            src = self.expr(e.operand, sid)
            if src not in (INT, NUM) or e.type not in (INT, NUM):
                raise MjTypeError(sid, f"cannot cast {src} to {e.type}")
            return e.type
        if isinstance(e, ast.Unary):
            t = self.expr(e.operand, sid)
            if e.op == "!":
                if t != BOOL:
                    raise MjTypeError(sid, f"'!' needs bool, found {t}")
                return BOOL
            if t not in (INT, NUM):
                raise MjTypeError(sid, f"unary '-' needs int or num, found {t}")
            return t
        if isinstance(e, ast.Binary):
            lt = self.expr(e.left, sid)
            rt = self.expr(e.right, sid)
            if lt != rt:
                raise MjTypeError(sid, f"operands of {e.op!r} differ: {lt} vs {rt}")
            if e.op in ARITH or e.op in ORDER:
                if lt not in (INT, NUM):
                    raise MjTypeError(sid, f"{e.op!r} needs int or num, found {lt}")
                return lt if e.op in ARITH else BOOL
            if e.op in LOGIC and lt != BOOL:
                raise MjTypeError(sid, f"{e.op!r} needs bool, found {lt}")
            return BOOL
        # Call
        arg_types = [self.expr(a, sid) for a in e.args]
        if e.name == "abs":
            if len(arg_types) != 1 or arg_types[0] not in (INT, NUM):
                raise MjTypeError(sid, "abs takes one int or num argument")
            return arg_types[0]
        if e.name not in self.signatures:
            raise MjTypeError(sid, f"unknown method {e.name!r}")
        params, ret = self.signatures[e.name]
        if tuple(arg_types) != params:
            raise MjTypeError(sid, f"{e.name} expects ({', '.join(params)}), got ({', '.join(arg_types)})")
        return ret


def typecheck(decl: ast.MethodDecl, signatures: Mapping[str, Signature] | None = None) -> None:
    """Raise MjTypeError if ``decl`` is ill-typed.

    ``signatures`` lists the other methods the body may call; the method's own
    signature is always in scope.
    """
    _Checker(decl, signatures or {}).check()
