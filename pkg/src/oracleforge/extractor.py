"""Method extraction: from an assertion-free unit test to the source of the
developer methods it invokes.

MJ tests are straight-line call lists, so the flow-sensitive pass reduces to
a scan over the literal invocations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .minilang import Invocation, ParseError, SourceMethod, Token, Value, format_num, parse_methods
from .minilang import ast
from .minilang.parser import parse_expression
from .minilang.typecheck import BUILTINS


class AbsentMethodError(LookupError):
    def __init__(self, name: str):
        super().__init__(f"method {name!r} is not defined in the program")
        self.name = name


@dataclass(frozen=True)
class UnitTest:
    id: str
    family: str
    calls: tuple[Invocation, ...]

    def __post_init__(self):
        if not self.calls:
            raise ValueError(f"test {self.id} has no invocations")

    @property
    def source_text(self) -> str:
        return render_test_text(self)

    def invoked(self) -> list[str]:
        """Distinct invoked names in order of first invocation."""
        seen: dict[str, None] = {}
        for inv in self.calls:
            seen.setdefault(inv.method_name, None)
        return list(seen)


@dataclass(frozen=True)
class ExtractedMUT:
    concatenated_source: str
    constituents: tuple[str, ...]
    token_stream: tuple[Token, ...]
    stmt_spans: tuple[int, ...]

    @property
    def n_statements(self) -> int:
        return max(self.stmt_spans) + 1 if self.stmt_spans else 0


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format_num(v)


def render_test_text(test: UnitTest) -> str:
    """Canonical ``name(args); name(args);`` rendering fed to the test encoder."""
    return " ".join(
        f"{inv.method_name}({', '.join(format_value(a) for a in inv.args)});" for inv in test.calls
    )


def _literal(e) -> Value:
    if isinstance(e, (ast.IntLit, ast.NumLit, ast.BoolLit)):
        return e.value
    if isinstance(e, ast.Unary) and e.op == "-" and isinstance(e.operand, (ast.IntLit, ast.NumLit)):
        return -e.operand.value
    raise ParseError(0, "test arguments must be literals")


def parse_test_text(text: str, test_id: str = "cli", family: str = "") -> UnitTest:
    """Inverse of render_test_text: ``"f(0.5); g(1, true);"`` -> UnitTest."""
    calls = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        e = parse_expression(chunk)
        if not isinstance(e, ast.Call):
            raise ParseError(0, f"expected a method call, got {chunk.strip()!r}")
        calls.append(Invocation(e.name, tuple(_literal(a) for a in e.args)))
    if not calls:
        raise ParseError(0, "no invocations in test text")
    return UnitTest(test_id, family, tuple(calls))


def mut_from_sources(sources: Sequence[str], names: Sequence[str]) -> ExtractedMUT:
    text = "\n".join(sources)
    tokens, _, token_sid = parse_methods(text)
    return ExtractedMUT(text, tuple(names), tuple(tokens), tuple(token_sid))


def mut_from_text(text: str) -> ExtractedMUT:
    """Rebuild an ExtractedMUT from its concatenated source alone."""
    tokens, methods, token_sid = parse_methods(text)
    names = tuple(pm.decl.name for pm in methods)
    return ExtractedMUT(text, names, tuple(tokens), tuple(token_sid))


def extract_mut(test: UnitTest, program: Iterable[SourceMethod]) -> ExtractedMUT:
    """Whole-method text of every program method the test calls directly.

    Repeated calls contribute once, ordered by first invocation; builtins are
    skipped.
    """
    by_name = {m.name: m for m in program}
    constituents = []
    for name in test.invoked():
        if name in by_name:
            constituents.append(by_name[name])
        elif name not in BUILTINS:
            raise AbsentMethodError(name)
    if not constituents:
        raise AbsentMethodError(f"<no program method invoked by {test.id}>")
    return mut_from_sources([m.source for m in constituents], [m.name for m in constituents])
