"""Deterministic, step-bounded evaluation of typechecked MJ programs.

Int is 64-bit two's complement with Java semantics (wrap-around, truncating
division, remainder takes the dividend's sign). Num is IEEE-754 binary64;
division by zero yields inf/nan rather than an error.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence, Union

from . import ast

Value = Union[bool, int, float]

DIV_BY_ZERO = "DivByZero"
STEP_LIMIT = "StepLimit"
ABSENT_METHOD = "AbsentMethod"
ARITY_MISMATCH = "ArityMismatch"

DEFAULT_STEP_LIMIT = 100_000
# Deep recursion is reported as StepLimit; MJ has no other stack-exhaustion outcome.
MAX_CALL_DEPTH = 200

_MASK = (1 << 64) - 1
_INT_MIN = -(1 << 63)
_INT_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class Invocation:
    method_name: str
    args: tuple[Value, ...]


@dataclass(frozen=True)
class Values:
    values: tuple[Value, ...]


@dataclass(frozen=True)
class RuntimeFault:
    kind: str
    at: int  # index of the invocation that faulted
    partial: tuple[Value, ...] = field(default=())


EvalOutcome = Union[Values, RuntimeFault]


class _Fault(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def wrap(v: int) -> int:
    v &= _MASK
    return v - (1 << 64) if v > _INT_MAX else v


def value_type(v: Value) -> str:
    if isinstance(v, bool):
        return ast.BOOL
    if isinstance(v, int):
        return ast.INT
    return ast.NUM


def value_key(v: Value) -> tuple:
    """Identity key for outcome comparison.

    Floats compare by bit pattern, so NaN equals NaN, except that -0.0 is
    folded onto 0.0: the two zeros are the same observable number.
    """
    if isinstance(v, float):
        return ("num", struct.pack("<d", v + 0.0 if v == 0.0 else v))
    return (value_type(v), v)


def outcome_key(outcome: EvalOutcome) -> tuple:
    if isinstance(outcome, Values):
        return ("values", tuple(value_key(v) for v in outcome.values))
    return ("fault", outcome.kind, outcome.at, tuple(value_key(v) for v in outcome.partial))


def outcomes_equal(a: EvalOutcome, b: EvalOutcome) -> bool:
    return outcome_key(a) == outcome_key(b)


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise _Fault(DIV_BY_ZERO)
    q = abs(a) // abs(b)
    return wrap(q if (a < 0) == (b < 0) else -q)


def _int_rem(a: int, b: int) -> int:
    if b == 0:
        raise _Fault(DIV_BY_ZERO)
    r = abs(a) % abs(b)
    return -r if a < 0 else r


def _num_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _num_rem(a: float, b: float) -> float:
    if b == 0.0 or math.isinf(a) or math.isnan(a) or math.isnan(b):
        return math.nan
    return math.fmod(a, b)


def _to_int(x: float) -> int:
    if math.isnan(x):
        return 0
    if x >= 9.223372036854775807e18:
        return _INT_MAX
    if x <= -9.223372036854775808e18:
        return _INT_MIN
    return int(x)


class _Machine:
    def __init__(self, methods: dict[str, ast.MethodDecl], step_limit: int):
        self.methods = methods
        self.step_limit = step_limit
        self.steps = 0
        self.depth = 0

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.step_limit:
            raise _Fault(STEP_LIMIT)

    def call(self, name: str, args: Sequence[Value]) -> Value:
        decl = self.methods.get(name)
        if decl is None:
            raise _Fault(ABSENT_METHOD)
        if len(args) != len(decl.params) or any(
            value_type(a) != t for a, (_, t) in zip(args, decl.params)
        ):
            raise _Fault(ARITY_MISMATCH)
        if self.depth >= MAX_CALL_DEPTH:
            raise _Fault(STEP_LIMIT)
        env = {pname: a for (pname, _), a in zip(decl.params, args)}
        self.depth += 1
        try:
            self.block(decl.body, env)
        except _Return as r:
            return r.value
        finally:
            self.depth -= 1
        raise AssertionError(f"{name} fell off its end; typecheck should prevent this")

    def block(self, stmts, env) -> None:
        for stmt in stmts:
            self.stmt(stmt, env)

    def stmt(self, s: ast.Stmt, env: dict) -> None:
        self.tick()
        if isinstance(s, ast.VarDecl):
            env[s.name] = self.eval(s.init, env)
        elif isinstance(s, ast.Assign):
            env[s.name] = self.eval(s.value, env)
        elif isinstance(s, ast.If):
            if self.eval(s.cond, env):
                self.block(s.then, env)
            elif s.orelse is not None:
                self.block(s.orelse, env)
        elif isinstance(s, ast.While):
            while self.eval(s.cond, env):
                self.block(s.body, env)
                self.tick()
        else:
            raise _Return(self.eval(s.value, env))

    def eval(self, e: ast.Expr, env: dict) -> Value:
        self.tick()
        if isinstance(e, ast.Binary):
            op = e.op
            if op == "&&":
                return bool(self.eval(e.left, env)) and bool(self.eval(e.right, env))
            if op == "||":
                return bool(self.eval(e.left, env)) or bool(self.eval(e.right, env))
            a = self.eval(e.left, env)
            b = self.eval(e.right, env)
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
            if isinstance(a, float):
                if op == "+":
                    return a + b
                if op == "-":
                    return a - b
                if op == "*":
                    return a * b
                if op == "/":
                    return _num_div(a, b)
                return _num_rem(a, b)
            if op == "+":
                return wrap(a + b)
            if op == "-":
                return wrap(a - b)
            if op == "*":
                return wrap(a * b)
            if op == "/":
                return _int_div(a, b)
            return _int_rem(a, b)
        if isinstance(e, ast.Var):
            return env[e.name]
        if isinstance(e, (ast.IntLit, ast.NumLit, ast.BoolLit)):
            return e.value
        if isinstance(e, ast.Paren):
            return self.eval(e.inner, env)
        if isinstance(e, ast.Unary):
            v = self.eval(e.operand, env)
            if e.op == "!":
                return not v
            return -v if isinstance(v, float) else wrap(-v)
        if isinstance(e, ast.Cast):
            v = self.eval(e.operand, env)
            if e.type == ast.NUM:
                return float(v)
            return _to_int(v) if isinstance(v, float) else v
        # Call
        args = [self.eval(a, env) for a in e.args]
        if e.name == "abs" and e.name not in self.methods:
            v = args[0]
            return math.fabs(v) if isinstance(v, float) else wrap(abs(v))
        return self.call(e.name, args)


def evaluate(program, calls: Sequence[Invocation], step_limit: int = DEFAULT_STEP_LIMIT) -> EvalOutcome:
    """Run ``calls`` in order against ``program``.

    ``program`` is an iterable of SourceMethod or MethodDecl. Each invocation
    gets a fresh environment; the step budget is shared by the whole list and
    evaluation stops at the first fault.
    """
    methods = {}
    for m in program:
        decl = getattr(m, "ast", m)
        methods[decl.name] = decl
    machine = _Machine(methods, step_limit)
    results: list[Value] = []
    for i, inv in enumerate(calls):
        try:
            if inv.method_name == "abs" and "abs" not in methods:
                if len(inv.args) != 1 or isinstance(inv.args[0], bool):
                    raise _Fault(ARITY_MISMATCH)
                machine.tick()
                v = inv.args[0]
                results.append(math.fabs(v) if isinstance(v, float) else wrap(abs(v)))
            else:
                results.append(machine.call(inv.method_name, inv.args))
        except _Fault as f:
            return RuntimeFault(f.kind, i, tuple(results))
        except RecursionError:
            return RuntimeFault(STEP_LIMIT, i, tuple(results))
    return Values(tuple(results))
