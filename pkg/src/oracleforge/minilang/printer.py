"""Canonical pretty-printer; output re-parses to an equal tree."""
from __future__ import annotations

from . import ast
from .lexer import format_num


def print_expr(e: ast.Expr) -> str:
    if isinstance(e, ast.IntLit):
        return str(e.value)
    if isinstance(e, ast.NumLit):
        return format_num(e.value)
    if isinstance(e, ast.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, ast.Var):
        return e.name
    if isinstance(e, ast.Paren):
        return f"({print_expr(e.inner)})"
    if isinstance(e, ast.Cast):
        return f"({e.type}) {print_expr(e.operand)}"
    if isinstance(e, ast.Unary):
        # a space keeps "- -x" from reading as one token in other lexers
        inner = print_expr(e.operand)
        return f"{e.op}{inner}" if not inner.startswith(("-", "!")) else f"{e.op} {inner}"
    if isinstance(e, ast.Binary):
        return f"{print_expr(e.left)} {e.op} {print_expr(e.right)}"
    return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"


def _block(stmts, depth: int) -> list[str]:
    lines = []
    for s in stmts:
        lines.extend(_stmt(s, depth))
    return lines


def _stmt(s: ast.Stmt, depth: int) -> list[str]:
    pad = "    " * depth
    if isinstance(s, ast.VarDecl):
        return [f"{pad}{s.type} {s.name} = {print_expr(s.init)};"]
    if isinstance(s, ast.Assign):
        return [f"{pad}{s.name} = {print_expr(s.value)};"]
    if isinstance(s, ast.Return):
        return [f"{pad}return {print_expr(s.value)};"]
    if isinstance(s, ast.While):
        return [f"{pad}while ({print_expr(s.cond)}) {{", *_block(s.body, depth + 1), f"{pad}}}"]
    lines = [f"{pad}if ({print_expr(s.cond)}) {{", *_block(s.then, depth + 1)]
    orelse = s.orelse
    while orelse is not None:
        if len(orelse) == 1 and isinstance(orelse[0], ast.If):
            nested = orelse[0]
            lines.append(f"{pad}}} else if ({print_expr(nested.cond)}) {{")
            lines.extend(_block(nested.then, depth + 1))
            orelse = nested.orelse
        else:
            lines.append(f"{pad}}} else {{")
            lines.extend(_block(orelse, depth + 1))
            orelse = None
    lines.append(f"{pad}}}")
    return lines


def print_method(decl: ast.MethodDecl) -> str:
    params = ", ".join(f"{t} {n}" for n, t in decl.params)
    lines = [f"{decl.return_type} {decl.name}({params}) {{", *_block(decl.body, 1), "}"]
    return "\n".join(lines)
