import random

import pytest
from hypothesis import given, settings, strategies as st

from oracleforge import mutator
from oracleforge.dataset import SIGN_FLIP_BUGGY, SIGN_FLIP_CORRECT, mutate_corpus, synth_corpus
from oracleforge.minilang import MjError, format_num, parse_method
from oracleforge.minilang import ast
from oracleforge.mutator import (
    Mutable,
    Mutant,
    MutationOperator as Op,
    NoMutant,
    NotApplicable,
    apply_mutable,
    buggy_statements,
    enumerate_mutables,
    generate_hom,
)

HAND_FIXTURES = [
    SIGN_FLIP_CORRECT,
    "int f(int a){ int s = 0; while (s < a) { s = s + 2; } return s; }",
    "num g(num x, num y){ if (x > y && !(x == 0.0)) { return (x - y) / 2.5; } else { return (y) * x + 1.0; } }",
    "bool p(int a, bool b){ return a % 3 == 1 || b != true; }",
    "int c(num x){ return (int) (x * 3.0) - abs(-4); }",
    "num h(num x){ num t = abs(x + 1.0) * x - 0.5; if (t >= 0.0) { t = -t; } return t; }",
    "int k(int a, int b){ if (a <= b) { return (a + b) * (a - b) / 7; } return 0; }",
    "bool q(bool a, bool b){ return (a || b) && !a == false; }",
]


def fixture_methods():
    out = [parse_method(src) for src in HAND_FIXTURES]
    corpus = synth_corpus(2, 6, 1, seed=11)
    for fam in corpus.families.values():
        out.extend(fam.methods.values())
    return out


# -- an independent scan: rewrite the tree, print it, re-parse --------------

_SWAPS = {
    Op.AOR: {"+": "-", "-": "+", "*": "/", "/": "*"},
    Op.ROR: {"<": "<=", "<=": "<", ">": ">=", ">=": ">", "==": "!=", "!=": "=="},
    Op.LOR: {"&&": "||", "||": "&&"},
}


def render(e, sub):
    """Print ``e`` with the nodes in ``sub`` (keyed by id) replaced by text."""
    if id(e) in sub:
        return sub[id(e)]
    if isinstance(e, ast.IntLit):
        return str(e.value)
    if isinstance(e, ast.NumLit):
        return format_num(e.value)
    if isinstance(e, ast.BoolLit):
        return str(e.value).lower()
    if isinstance(e, ast.Var):
        return e.name
    if isinstance(e, ast.Paren):
        return "(" + render(e.inner, sub) + ")"
    if isinstance(e, ast.Cast):
        return f"({e.type}) " + render(e.operand, sub)
    if isinstance(e, ast.Unary):
        return f"{e.op} " + render(e.operand, sub)
    if isinstance(e, ast.Binary):
        return f"{render(e.left, sub)} {e.op} {render(e.right, sub)}"
    return e.name + "(" + ", ".join(render(a, sub) for a in e.args) + ")"


def render_body(stmts, sub):
    parts = []
    for s in stmts:
        if isinstance(s, ast.VarDecl):
            parts.append(f"{s.type} {s.name} = {render(s.init, sub)};")
        elif isinstance(s, ast.Assign):
            parts.append(f"{s.name} = {render(s.value, sub)};")
        elif isinstance(s, ast.Return):
            parts.append(f"return {render(s.value, sub)};")
        elif isinstance(s, ast.While):
            parts.append(f"while ({render(s.cond, sub)}) {{ {render_body(s.body, sub)} }}")
        else:
            text = f"if ({render(s.cond, sub)}) {{ {render_body(s.then, sub)} }}"
            if s.orelse is not None:
                text += f" else {{ {render_body(s.orelse, sub)} }}"
            parts.append(text)
    return " ".join(parts)


def render_method(decl, sub):
    params = ", ".join(f"{t} {n}" for n, t in decl.params)
    return f"{decl.return_type} {decl.name}({params}) {{ {render_body(decl.body, sub)} }}"


def rewrite(op, stmt, node, index):
    """Replacement text for ``node`` under ``op``, or None if it does not apply."""
    if op in _SWAPS:
        if isinstance(node, ast.Binary) and node.op in _SWAPS[op]:
            return f"{render(node.left, {})} {_SWAPS[op][node.op]} {render(node.right, {})}"
        return None
    if op is Op.NegCond:
        if index == 0 and isinstance(stmt, (ast.If, ast.While)):
            return "!(" + render(node, {}) + ")"
        return None
    if op is Op.ConstRep:
        if isinstance(node, ast.BoolLit):
            return str(not node.value).lower()
        if isinstance(node, ast.IntLit):
            return str(node.value + 1)
        if isinstance(node, ast.NumLit):
            return "-" + format_num(node.value)
        return None
    if op is Op.ConstZero:
        return "0" if isinstance(node, ast.IntLit) and node.value != 0 else None
    # ParenShift: drop the leftmost operand's closing paren, close after the chain
    if not isinstance(node, ast.Binary):
        return None
    leaf = node.left
    while isinstance(leaf, ast.Binary):
        leaf = leaf.left
    if isinstance(leaf, ast.Paren):
        opened = "(" + render(leaf.inner, {})
    elif isinstance(leaf, ast.Call) and leaf.args:
        opened = leaf.name + "(" + ", ".join(render(a, {}) for a in leaf.args)
    else:
        return None
    return render(node, {id(leaf): opened}) + ")"


def brute_force(method):
    """Every (op, stmt, node) whose rewrite compiles and changes the tree."""
    found = {}
    for stmt in ast.walk_statements(method.ast.body):
        for idx, node in enumerate(ast.statement_nodes(stmt)):
            for op in Op:
                text = rewrite(op, stmt, node, idx)
                if text is None:
                    continue
                try:
                    mutated = parse_method(render_method(method.ast, {id(node): text}), method.signatures)
                except MjError:
                    continue
                if mutated.ast != method.ast:
                    found[Mutable(op, stmt.sid, idx)] = mutated.ast
    return found


def test_enumerate_matches_brute_force_scan():
    methods = fixture_methods()
    assert len(methods) >= 10
    total = 0
    for m in methods:
        expected = brute_force(m)
        got = enumerate_mutables(m)
        assert set(got) == set(expected), m.source
        assert len(got) == len(set(got))
        for mut in got:
            assert parse_method(apply_mutable(m, mut), m.signatures).ast == expected[mut]
        total += len(got)
    assert total > 50


def test_enumeration_order():
    key = {op: i for i, op in enumerate(Op)}
    for m in fixture_methods():
        got = enumerate_mutables(m)
        assert got == sorted(got, key=lambda x: (x.stmt, x.node, key[x.op]))


def test_seeded_homs_all_compile():
    corpus = synth_corpus(4, 12, 1, seed=2)
    methods = [m for fam in corpus.families.values() for m in fam.methods.values()]
    available = {m.name + m.source: len(enumerate_mutables(m)) for m in methods}
    rng = random.Random(1234)
    made = 0
    for i in range(1000):
        m = methods[i % len(methods)]
        order = 1 + i % 4
        try:
            hom = generate_hom(m, order, random.Random(rng.random()), shuffle=True)
        except NoMutant:
            assert available[m.name + m.source] == 0
            continue
        made += 1
        parse_method(hom.source, m.signatures)  # parses and typechecks
        assert 1 <= hom.order <= min(order, available[m.name + m.source])
        assert hom.order == len(hom.applied) == len(set(hom.applied))
        assert hom.source != m.source
    assert made >= 900


def test_paren_shift_turns_sign_flip_correct_into_buggy():
    m = parse_method(SIGN_FLIP_CORRECT)
    shifts = [x for x in enumerate_mutables(m) if x.op is Op.ParenShift]
    assert Mutable(Op.ParenShift, 0, 0) in shifts
    assert apply_mutable(m, Mutable(Op.ParenShift, 0, 0)) == SIGN_FLIP_BUGGY


def test_rewrites_preserve_surrounding_bytes():
    src = "int f(int a){ // keep me\n  return a   +   1; }"
    m = parse_method(src)
    assert apply_mutable(m, Mutable(Op.AOR, 0, 0)) == src.replace("+", "-")
    assert apply_mutable(m, Mutable(Op.ConstRep, 0, 2)) == src.replace("1;", "2;")
    assert apply_mutable(m, Mutable(Op.ConstZero, 0, 2)) == src.replace("1;", "0;")


def test_negcond_wraps_condition():
    m = parse_method("int f(int a){ while (a > 0) { a = a - 1; } return a; }")
    out = apply_mutable(m, Mutable(Op.NegCond, 0, 0))
    assert "while (!(a > 0))" in out


def test_not_applicable():
    m = parse_method("int f(int a){ return a + 1; }")
    with pytest.raises(NotApplicable):
        apply_mutable(m, Mutable(Op.LOR, 0, 0))
    with pytest.raises(NotApplicable):
        apply_mutable(m, Mutable(Op.NegCond, 0, 0))
    with pytest.raises(NotApplicable):
        apply_mutable(m, Mutable(Op.AOR, 5, 0))


def test_no_mutables_raises():
    m = parse_method("int f(int a){ return a; }")
    assert enumerate_mutables(m) == []
    with pytest.raises(NoMutant):
        generate_hom(m, 2)


def test_order_must_be_positive():
    with pytest.raises(ValueError):
        generate_hom(parse_method(SIGN_FLIP_CORRECT), 0)


def test_stops_at_first_noncompilable_step(monkeypatch):
    # Site revalidation makes naturally conflicting pairs rare, so the
    # compiler is replaced by one that rejects anything rewritten twice.
    m = parse_method("int f(int a){ if (a > 0) { return a + 1; } return 2; }")
    mutables = enumerate_mutables(m)
    assert len(mutables) >= 3
    allowed = {m.source} | {apply_mutable(m, x) for x in mutables}
    real = mutator._compiles

    def strict(source, method):
        return real(source, method) if source in allowed else None

    monkeypatch.setattr(mutator, "_compiles", strict)
    hom = generate_hom(m, 4)
    assert hom.order == 1
    assert hom.applied == (mutables[0],)
    assert hom.source == apply_mutable(m, mutables[0])


def test_order_is_bounded_by_available():
    m = parse_method("bool f(bool b){ return b && true; }")
    available = enumerate_mutables(m)
    hom = generate_hom(m, 4)
    assert hom.order <= len(available)
    assert hom.order <= 4


@given(st.integers(0, 2**32), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_hom_deterministic_for_seed(seed, order):
    m = parse_method(HAND_FIXTURES[5])
    a = generate_hom(m, order, random.Random(seed), shuffle=True)
    b = generate_hom(m, order, random.Random(seed), shuffle=True)
    assert a == b


def test_mutate_corpus_deterministic():
    corpus = synth_corpus(2, 6, 1, seed=4)
    a = mutate_corpus(corpus, 4, 2, seed=9)
    b = mutate_corpus(corpus, 4, 2, seed=9)
    assert [(f, n, x.to_json()) for f, n, x in a] == [(f, n, x.to_json()) for f, n, x in b]


def test_json_round_trip():
    m = parse_method(HAND_FIXTURES[2])
    hom = generate_hom(m, 3, random.Random(3), shuffle=True)
    assert Mutant.from_json(hom.to_json()) == hom
    for x in enumerate_mutables(m):
        assert Mutable.from_json(x.to_json()) == x


def test_buggy_statements_are_applied_sites():
    m = parse_method(HAND_FIXTURES[5])
    hom = generate_hom(m, 4)
    assert buggy_statements(m, hom) == {x.stmt for x in hom.applied}
    assert all(0 <= s < m.n_statements for s in buggy_statements(m, hom))
