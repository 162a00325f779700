"""Recursive-descent parser for MJ methods.

Grammar::

    method  := type IDENT '(' [param (',' param)*] ')' block
    block   := '{' stmt* '}'
    stmt    := type IDENT '=' expr ';' | IDENT '=' expr ';'
             | 'if' '(' expr ')' block ['else' (block | if-stmt)]
             | 'while' '(' expr ')' block | 'return' expr ';'
    expr    := or;  or := and ('||' and)*;  and := eq ('&&' eq)*
    eq      := rel (('=='|'!=') rel)*;  rel := add (('<'|'<='|'>'|'>=') add)*
    add     := mul (('+'|'-') mul)*;  mul := unary (('*'|'/'|'%') unary)*
    unary   := ('-'|'!') unary | '(' type ')' unary | primary
    primary := INT | NUM | BOOL | IDENT ['(' args ')'] | '(' expr ')'
"""
from __future__ import annotations

from dataclasses import dataclass

from . import ast
from .errors import ParseError
from .lexer import INT_MAX, TYPE_KEYWORDS, Token, tokenize

_PRECEDENCE = (
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)


@dataclass
class ParsedMethod:
    decl: ast.MethodDecl
    token_start: int  # index of the method's first token in the token list
    token_end: int  # one past its last token
    n_statements: int


class _Parser:
    def __init__(self, tokens: list[Token], source_len: int):
        self.tokens = tokens
        self.pos = 0
        self.source_len = source_len
        self.sid_stack: list[int] = []
        self.token_sid: list[int | None] = [None] * len(tokens)
        self.next_sid = 0

    # -- token helpers -------------------------------------------------
    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, lexeme: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.lexeme == lexeme and tok.kind in ("operator", "punct", "keyword")

    def error(self, expected: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            return ParseError(self.source_len, f"expected {expected}, found end of input")
        return ParseError(tok.start, f"expected {expected}, found {tok.lexeme!r}")

    def advance(self) -> int:
        if self.sid_stack:
            self.token_sid[self.pos] = self.sid_stack[-1]
        self.pos += 1
        return self.pos - 1

    def expect(self, lexeme: str) -> int:
        if not self.at(lexeme):
            raise self.error(repr(lexeme))
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            raise self.error(what)
        self.advance()
        return tok

    def at_type(self) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "keyword" and tok.lexeme in TYPE_KEYWORDS

    def parse_type(self) -> str:
        if not self.at_type():
            raise self.error("a type (int, num, bool)")
        return self.tokens[self.advance()].lexeme

    # -- declarations --------------------------------------------------
    def method(self) -> ParsedMethod:
        start = self.pos
        first_sid = self.next_sid
        rtype = self.parse_type()
        name = self.expect_kind("ident", "method name").lexeme
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ptype = self.parse_type()
                pname = self.expect_kind("ident", "parameter name").lexeme
                params.append((pname, ptype))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.block()
        decl = ast.MethodDecl(name, tuple(params), rtype, body)
        return ParsedMethod(decl, start, self.pos, self.next_sid - first_sid)

    def block(self) -> tuple[ast.Stmt, ...]:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek() is None:
                raise self.error("'}'")
            stmts.append(self.statement())
        self.expect("}")
        return tuple(stmts)

    def statement(self) -> ast.Stmt:
        sid = self.next_sid
        self.next_sid += 1
        self.sid_stack.append(sid)
        try:
            return self._statement(sid)
        finally:
            self.sid_stack.pop()

    def _statement(self, sid: int) -> ast.Stmt:
        if self.at_type():
            vtype = self.parse_type()
            name = self.expect_kind("ident", "variable name").lexeme
            self.expect("=")
            init = self.expr()
            self.expect(";")
            return ast.VarDecl(vtype, name, init, sid=sid)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.at("else"):
                self.advance()
                if self.at("if"):
                    orelse = (self.statement(),)
                else:
                    orelse = self.block()
            return ast.If(cond, then, orelse, sid=sid)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            body = self.block()
            return ast.While(cond, body, sid=sid)
        if self.at("return"):
            self.advance()
            value = self.expr()
            self.expect(";")
            return ast.Return(value, sid=sid)
        tok = self.peek()
        if tok is not None and tok.kind == "ident" and self.at("=", 1):
            self.advance()
            self.advance()
            value = self.expr()
            self.expect(";")
            return ast.Assign(tok.lexeme, value, sid=sid)
        raise self.error("a statement")

    # -- expressions ---------------------------------------------------
    def expr(self) -> ast.Expr:
        return self.binary(0)

    def binary(self, level: int) -> ast.Expr:
        if level == len(_PRECEDENCE):
            return self.unary()
        start = self.pos
        left = self.binary(level + 1)
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator" or tok.lexeme not in _PRECEDENCE[level]:
                return left
            self.advance()
            right = self.binary(level + 1)
            left = ast.Binary(tok.lexeme, left, right, span=(start, self.pos - 1))

    def unary(self) -> ast.Expr:
        start = self.pos
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.lexeme in ("-", "!"):
            self.advance()
            nxt = self.peek()
            if tok.lexeme == "-" and nxt is not None and nxt.kind == "int-lit" and int(nxt.lexeme) == INT_MAX + 1:
                # as in Java, the magnitude of the minimum int is legal only right after unary minus
                self.advance()
                return ast.Unary("-", ast.IntLit(INT_MAX + 1, span=(start + 1, start + 1)), span=(start, start + 1))
            operand = self.unary()
            return ast.Unary(tok.lexeme, operand, span=(start, self.pos - 1))
        if self.at("(") and self.peek(1) is not None and self.peek(1).kind == "keyword" \
                and self.peek(1).lexeme in TYPE_KEYWORDS and self.at(")", 2):
            self.advance()
            ctype = self.tokens[self.advance()].lexeme
            self.advance()
            operand = self.unary()
            return ast.Cast(ctype, operand, span=(start, self.pos - 1))
        return self.primary()

    def primary(self) -> ast.Expr:
        start = self.pos
        tok = self.peek()
        if tok is None:
            raise self.error("an expression")
        if tok.kind == "int-lit":
            value = int(tok.lexeme)
            if value > INT_MAX:
                raise ParseError(tok.start, f"int literal out of range: {tok.lexeme}")
            self.advance()
            return ast.IntLit(value, span=(start, start))
        if tok.kind == "num-lit":
            self.advance()
            return ast.NumLit(float(tok.lexeme), span=(start, start))
        if tok.kind == "bool-lit":
            self.advance()
            return ast.BoolLit(tok.lexeme == "true", span=(start, start))
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.at(","):
                            break
                        self.advance()
                self.expect(")")
                return ast.Call(tok.lexeme, tuple(args), span=(start, self.pos - 1))
            return ast.Var(tok.lexeme, span=(start, start))
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return ast.Paren(inner, span=(start, self.pos - 1))
        raise self.error("an expression")


def parse_methods(source: str) -> tuple[list[Token], list[ParsedMethod], list[int]]:
    """Parse one or more consecutive method declarations (no type checking).

    Returns the token list, the parsed methods and a token-index to
    statement-id list. Statement ids run across all methods in source order.
    Tokens outside any statement (signature, braces) belong to the method's
    first statement if they precede it and to its last top-level statement
    otherwise.
    """
    tokens = tokenize(source)
    parser = _Parser(tokens, len(source.encode("utf-8")))
    methods = []
    while parser.peek() is not None:
        methods.append(parser.method())
    if not methods:
        raise ParseError(0, "expected a method declaration, found end of input")
    token_sid = parser.token_sid
    first_sid = 0
    for pm in methods:
        body = pm.decl.body
        head = body[0].sid if body else first_sid
        tail = body[-1].sid if body else first_sid
        seen_stmt = False
        for i in range(pm.token_start, pm.token_end):
            if token_sid[i] is None:
                token_sid[i] = tail if seen_stmt else head
            else:
                seen_stmt = True
        first_sid += pm.n_statements
    return tokens, methods, [s for s in token_sid]  # type: ignore[misc]


def parse_expression(source: str) -> ast.Expr:
    tokens = tokenize(source)
    parser = _Parser(tokens, len(source.encode("utf-8")))
    expr = parser.expr()
    if parser.peek() is not None:
        raise parser.error("end of expression")
    return expr
