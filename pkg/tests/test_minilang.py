import math
import struct

import pytest
from hypothesis import given, settings, strategies as st

from oracleforge.minilang import (
    DIV_BY_ZERO,
    STEP_LIMIT,
    Invocation,
    MjTypeError,
    ParseError,
    RuntimeFault,
    Values,
    evaluate,
    outcomes_equal,
    parse_method,
    parse_methods,
    print_method,
    tokenize,
    tokenize_with_statements,
)
from oracleforge.dataset import SIGN_FLIP_BUGGY, SIGN_FLIP_CORRECT, synth_corpus

SIGN_FLIP = SIGN_FLIP_CORRECT


def run(src, *args, limit=100_000):
    m = parse_method(src)
    return evaluate([m], [Invocation(m.name, tuple(args))], limit)


def value(src, *args):
    out = run(src, *args)
    assert isinstance(out, Values), out
    return out.values[0]


def sign_flip(x):
    # the reference formula, by hand
    return abs(x) * (x + 2) * (x - 2)


def sign_flip_buggy(x):
    return abs(x * (x + 2) * (x - 2))


# -- parsing --------------------------------------------------------------

def test_parse_sign_flip_structure():
    m = parse_method(SIGN_FLIP)
    assert m.name == "f"
    assert m.params == (("x", "num"),)
    assert m.return_type == "num"
    assert m.n_statements == 1


def test_missing_return_is_type_error():
    with pytest.raises(MjTypeError):
        parse_method("int g(){ }")


def test_parse_error_reports_semicolon_offset():
    src = "int h(int a){ return a + ; }"
    with pytest.raises(ParseError) as info:
        parse_method(src)
    assert info.value.offset == src.index(";")


@pytest.mark.parametrize("src", [
    "int f(int a){ int a = 1; return a; }",          # shadowing
    "int f(int a){ return a + 1.0; }",               # no implicit int/num mixing
    "int f(int a){ return g(a); }",                  # unknown method
    "bool f(int a){ if (a) { return true; } return false; }",
    "int f(int a){ while (a > 0) { return 1; } }",   # loops never guarantee a return
])
def test_type_errors(src):
    with pytest.raises(MjTypeError):
        parse_method(src)


def test_type_error_carries_statement_id():
    with pytest.raises(MjTypeError) as info:
        parse_method("int f(int a){ int b = 1; int c = true; return b; }")
    assert info.value.stmt_id == 1


def test_if_else_both_returning_is_fine():
    m = parse_method("int f(int a){ if (a > 0) { return 1; } else { return 2; } }")
    assert m.n_statements == 3


def test_two_methods_in_parse_method_rejected():
    with pytest.raises(ParseError):
        parse_method("int f(){ return 1; } int g(){ return 2; }")


# -- tokens and statements ------------------------------------------------

def test_return_true_tokens_all_statement_zero():
    m = parse_method("bool t(){ return true; }")
    tokens, spans = tokenize_with_statements(m)
    body = [(t.lexeme, s) for t, s in zip(tokens, spans)]
    assert ("return", 0) in body and ("true", 0) in body
    assert set(spans) == {0}


def test_two_statement_body_max_id_one():
    m = parse_method("int f(int a){ int b = a + 1; return b; }")
    _, spans = tokenize_with_statements(m)
    assert max(spans) == 1
    assert set(spans) == {0, 1}


def test_displaced_paren_is_its_own_token():
    m = parse_method(SIGN_FLIP_BUGGY)
    lex = [t.lexeme for t in m.token_stream]
    # the closing paren of abs( ... ) sits just before the semicolon
    semi = lex.index(";")
    assert lex[semi - 1] == ")" and lex[semi - 2] == ")"
    assert m.token_stream[semi - 1].start != m.token_stream[semi - 2].start


def test_token_offsets_are_byte_offsets():
    src = "// café\nint f(){ return 1; }"
    toks = tokenize(src)
    data = src.encode()
    for t in toks:
        assert data[t.start:t.end].decode() == t.lexeme


def test_spaced_lexemes_relex_to_same_kinds():
    for src in (SIGN_FLIP, SIGN_FLIP_BUGGY, "bool g(int a){ return !(a <= 3) || a % 2 == 0 && true; }"):
        toks = tokenize(src)
        again = tokenize(" ".join(t.lexeme for t in toks))
        assert [t.kind for t in toks] == [t.kind for t in again]


def test_spans_cover_every_token():
    corpus = synth_corpus(2, 6, 1, seed=3)
    for fam in corpus.families.values():
        for m in fam.methods.values():
            assert len(m.stmt_spans) == len(m.token_stream)
            assert set(m.stmt_spans) == set(range(m.n_statements))


# -- evaluation -----------------------------------------------------------

def test_sign_flip_values_by_hand():
    assert value(SIGN_FLIP, 0.5) == -1.875
    assert value(SIGN_FLIP_BUGGY, 0.5) == 1.875
    assert value(SIGN_FLIP, 3.0) == 15.0 == value(SIGN_FLIP_BUGGY, 3.0)


@given(st.floats(-4, 4, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_sign_flip_matches_formula(x):
    assert value(SIGN_FLIP, x) == sign_flip(x)
    assert value(SIGN_FLIP_BUGGY, x) == sign_flip_buggy(x)


def test_infinite_loop_hits_step_limit():
    out = run("int w(){ while(true){} return 0; }", limit=10_000)
    assert isinstance(out, RuntimeFault) and out.kind == STEP_LIMIT


def test_int_division_by_zero_faults():
    out = run("int d(int a){ return a / 0; }", 3)
    assert isinstance(out, RuntimeFault) and out.kind == DIV_BY_ZERO
    out = run("int d(int a){ return a % 0; }", 3)
    assert out.kind == DIV_BY_ZERO


def test_num_division_by_zero_is_ieee():
    assert value("num d(num a){ return a / 0.0; }", 1.0) == math.inf
    assert value("num d(num a){ return a / 0.0; }", -1.0) == -math.inf
    assert math.isnan(value("num d(num a){ return a / 0.0; }", 0.0))


def test_float_semantics():
    got = value("num s(num a, num b){ return a + b; }", 0.1, 0.2)
    assert got != 0.3 and got == 0.1 + 0.2


def test_int_division_truncates_toward_zero():
    assert value("int d(int a, int b){ return a / b; }", -7, 2) == -3
    assert value("int d(int a, int b){ return a % b; }", -7, 2) == -1


def test_int_overflow_wraps():
    big = 2**63 - 1
    assert value("int d(int a){ return a + 1; }", big) == -(2**63)


def test_casts():
    assert value("int c(num a){ return (int) a; }", -2.7) == -2
    assert value("num c(int a){ return (num) a / 2.0; }", 3) == 1.5


def test_values_length_and_fault_stops_evaluation():
    m = parse_method("int d(int a){ return 10 / a; }")
    out = evaluate([m], [Invocation("d", (2,)), Invocation("d", (0,)), Invocation("d", (5,))])
    assert isinstance(out, RuntimeFault) and out.at == 1 and out.partial == (5,)
    ok = evaluate([m], [Invocation("d", (2,)), Invocation("d", (5,))])
    assert ok == Values((5, 2))


def test_num_equality_by_bits_with_signed_zero_folded():
    nan = struct.unpack("<d", struct.pack("<Q", 0x7FF8000000000000))[0]
    assert outcomes_equal(Values((nan,)), Values((nan,)))
    assert outcomes_equal(Values((0.0,)), Values((-0.0,)))
    assert not outcomes_equal(Values((0.0,)), Values((5e-324,)))
    assert not outcomes_equal(Values((1,)), Values((1.0,)))
    assert not outcomes_equal(Values((1,)), RuntimeFault(DIV_BY_ZERO, 0))
    assert not outcomes_equal(RuntimeFault(DIV_BY_ZERO, 0), RuntimeFault(STEP_LIMIT, 0))


def test_evaluate_is_deterministic():
    corpus = synth_corpus(1, 6, 3, seed=5)
    fam = next(iter(corpus.families.values()))
    for t in fam.tests:
        a = evaluate(fam.program, t.calls)
        b = evaluate(fam.program, t.calls)
        assert outcomes_equal(a, b)


# -- printing -------------------------------------------------------------

def test_print_round_trip_over_corpus():
    corpus = synth_corpus(4, 12, 1, seed=0)
    for fam in corpus.families.values():
        sigs = fam.signatures()
        for m in fam.methods.values():
            again = parse_method(print_method(m.ast), sigs)
            assert again.ast == m.ast


def test_parse_methods_global_statement_ids():
    text = "int a(){ int x = 1; return x; }\nint b(){ return 2; }"
    tokens, methods, sids = parse_methods(text)
    assert [pm.n_statements for pm in methods] == [2, 1]
    assert sorted(set(sids)) == [0, 1, 2]


def test_min_int_literal_only_after_minus():
    assert value("int m(){ return -9223372036854775808; }") == -(2**63)
    with pytest.raises(ParseError):
        parse_method("int m(){ return 9223372036854775808; }")
    with pytest.raises(ParseError):
        parse_method("int m(){ return -(9223372036854775808); }")
